#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace vgwe {

// Streaming SHA-256. Used to fingerprint canonical scenario text so run
// artifacts can state exactly which inputs produced them.
class Sha256 {
public:
  Sha256();
  void update(const void* data, std::size_t len);
  void update(std::string_view s) { update(s.data(), s.size()); }
  // Finishes the digest; the object must not be updated afterwards.
  std::string hex_digest();

private:
  void process_block(const std::uint8_t* block);

  std::uint32_t state_[8];
  std::uint8_t buffer_[64];
  std::uint64_t total_len_ = 0;
  std::size_t buffer_len_ = 0;
  bool finished_ = false;
};

std::string sha256_hex(std::string_view data);

}  // namespace vgwe
