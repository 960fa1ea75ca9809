#pragma once

#include <string>

#include "vgwe/network.hpp"

// Reader/writer for the sectioned plain-text scenario format described in
// docs/scenario_format.md. Hand-written files carry each block in its
// customary published units; `units = internal` in [meta] switches every
// numeric column to the library's internal units, which is what the canonical
// serializer emits so that a round trip reproduces the exact same values.

namespace vgwe::net {

// Parses and fully validates. Throws IoError on unreadable input or syntax
// problems, ValidationError on violated model invariants.
Scenario load_scenario(const std::string& path);

// Same, from an in-memory document (diagnostics cite `origin`).
Scenario parse_scenario(const std::string& text, const std::string& origin = "<string>");

// Canonical expanded form: generated transport networks and populations are
// written out explicitly, floats at full precision, internal units.
std::string serialize_scenario(const Scenario& scenario);

}  // namespace vgwe::net
