#include <doctest.h>

#include <string>

#include "test_util.hpp"
#include "vgwe/artifacts.hpp"
#include "vgwe/scenario_io.hpp"
#include "vgwe/sha256.hpp"
#include "vgwe/solver.hpp"

using namespace vgwe;

namespace {

struct SolvedToy {
  net::Scenario scenario;
  RunManifest manifest;
  EquilibriumResult result;
};

SolvedToy solve_toy() {
  SolvedToy out;
  out.scenario = net::load_scenario(testutil::src_path("scenarios/toy_pin.toml"));
  SolverConfig cfg = resolve_config(out.scenario.solver);
  cfg.trace_every = 50;
  out.result = solve_equilibrium(out.scenario, cfg);
  out.manifest = make_manifest("scenarios/toy_pin.toml", out.scenario, out.result.used);
  return out;
}

}  // namespace

TEST_CASE("hash function matches published vectors") {
  CHECK(sha256_hex("") ==
        "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  CHECK(sha256_hex("abc") ==
        "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  CHECK(sha256_hex("abcdbcdecdefdefgefghfghighijhijkijkljklmklmnlmnomnopnopq") ==
        "248d6a61d20638b8e5c026930c3e6039a33ce45964ff2167f6ecedd419db06c1");
}

TEST_CASE("the manifest fingerprints the canonical serialization") {
  net::Scenario sc = net::load_scenario(testutil::src_path("scenarios/toy_line.toml"));
  SolverConfig cfg = resolve_config(sc.solver);
  RunManifest manifest = make_manifest("scenarios/toy_line.toml", sc, cfg);
  CHECK(manifest.scenario_hash == sha256_hex(serialize_scenario(sc)));
  CHECK(manifest.scenario_name == sc.name);
  CHECK(manifest.seed == cfg.seed);
}

TEST_CASE("value formatting is locale-free and stable") {
  CHECK(fmt_value(0.0) == "0");
  CHECK(fmt_value(-0.0) == "0");
  CHECK(fmt_value(1.5) == "1.5");
  CHECK(fmt_value(1234567.25) == "1234567.25");
  CHECK(fmt_value(0.1).find(',') == std::string::npos);
}

TEST_CASE("artifacts are byte-identical across renders and runs") {
  SolvedToy a = solve_toy();
  SolvedToy b = solve_toy();

  CHECK(render_summary(a.manifest, a.scenario, a.result) ==
        render_summary(b.manifest, b.scenario, b.result));
  CHECK(render_trace_csv(a.manifest, a.scenario, a.result) ==
        render_trace_csv(b.manifest, b.scenario, b.result));
  CHECK(render_voltage_csv(a.manifest, a.scenario, a.result) ==
        render_voltage_csv(b.manifest, b.scenario, b.result));

  // Rendering twice from the same result is also identical.
  CHECK(render_summary(a.manifest, a.scenario, a.result) ==
        render_summary(a.manifest, a.scenario, a.result));
}

TEST_CASE("every artifact embeds its provenance") {
  SolvedToy toy = solve_toy();
  for (const std::string& text :
       {render_summary(toy.manifest, toy.scenario, toy.result),
        render_trace_csv(toy.manifest, toy.scenario, toy.result),
        render_voltage_csv(toy.manifest, toy.scenario, toy.result)}) {
    CHECK(text.find(std::string(kCodeVersion)) != std::string::npos);
    CHECK(text.find(toy.manifest.scenario_hash) != std::string::npos);
    CHECK(text.find("seed") != std::string::npos);
    CHECK(text.find("config") != std::string::npos);
    CHECK(text.find("tau=") != std::string::npos);
  }
}

TEST_CASE("the trace table has one row per recorded sweep") {
  net::Scenario sc = net::load_scenario(testutil::src_path("scenarios/toy_pin.toml"));
  SolverConfig cfg = resolve_config(sc.solver);
  cfg.trace_every = 1;
  EquilibriumResult res = solve_equilibrium(sc, cfg);
  REQUIRE(res.stats.converged);
  RunManifest manifest = make_manifest("scenarios/toy_pin.toml", sc, res.used);

  std::string csv = render_trace_csv(manifest, sc, res);
  int data_rows = 0;
  bool header_seen = false;
  std::size_t pos = 0;
  while (pos < csv.size()) {
    std::size_t end = csv.find('\n', pos);
    if (end == std::string::npos) end = csv.size();
    std::string line = csv.substr(pos, end - pos);
    pos = end + 1;
    if (line.empty() || line[0] == '#') continue;
    if (!header_seen) {
      header_seen = true;
      CHECK(line.rfind("iter,", 0) == 0);
      CHECK(line.find("p_gen_1") != std::string::npos);
      CHECK(line.find("dlmp_1") != std::string::npos);
      CHECK(line.find("demand_1") != std::string::npos);
      CHECK(line.find("surcharge_1") != std::string::npos);
      CHECK(line.find("step_delta") != std::string::npos);
      CHECK(line.find("comp_gap") != std::string::npos);
      continue;
    }
    ++data_rows;
  }
  CHECK(data_rows == res.stats.iterations);
}

TEST_CASE("the voltage table lists every bus") {
  SolvedToy toy = solve_toy();
  std::string csv = render_voltage_csv(toy.manifest, toy.scenario, toy.result);
  CHECK(csv.find("bus,v_sq,v_kv") != std::string::npos);
  for (const net::BusSpec& bus : toy.scenario.grid.buses) {
    CHECK(csv.find("\n" + std::to_string(bus.id) + ",") != std::string::npos);
  }
}

TEST_CASE("sweep rows condense the run they came from") {
  SolvedToy toy = solve_toy();
  SweepRow row = summarize_sweep_point(2.0, toy.scenario, toy.result);
  CHECK(row.value == 2.0);
  CHECK(row.converged == toy.result.stats.converged);
  CHECK(row.iterations == toy.result.stats.iterations);

  OperatorStack op(toy.scenario);
  const auto& glay = op.dso().layout();
  double total = 0.0;
  for (int g = 0; g < glay.n_gen; ++g) total += toy.result.z[op.layout().y() + glay.p(g)];
  CHECK(row.total_gen_p == doctest::Approx(total).epsilon(1e-12));
  CHECK(row.dlmp.size() == 1);
  CHECK(row.demand.size() == 1);

  std::vector<SweepRow> rows = {row};
  std::string csv = render_sweep_csv(toy.manifest, toy.scenario, "n_evs", rows);
  CHECK(csv.find("n_evs,converged,iterations") != std::string::npos);
  CHECK(csv.find(toy.manifest.scenario_hash) != std::string::npos);
}

TEST_CASE("different seeds change the manifest line only") {
  SolvedToy toy = solve_toy();
  RunManifest reseeded = toy.manifest;
  reseeded.seed = toy.manifest.seed + 1;
  std::string a = render_voltage_csv(toy.manifest, toy.scenario, toy.result);
  std::string b = render_voltage_csv(reseeded, toy.scenario, toy.result);
  CHECK(a != b);
  CHECK(a.substr(a.find("bus,")) == b.substr(b.find("bus,")));
}
