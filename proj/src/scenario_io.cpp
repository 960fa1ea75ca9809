#include "vgwe/scenario_io.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

namespace vgwe::net {

namespace {

struct Section {
  std::map<std::string, std::string> kv;
  std::vector<std::vector<std::string>> rows;
  std::vector<int> row_lines;
  int line = 0;
  bool used = false;
};

using Document = std::map<std::string, Section>;

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

std::vector<std::string> split_ws(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream is(s);
  std::string tok;
  while (is >> tok) out.push_back(tok);
  return out;
}

Document parse_document(const std::string& text, const std::string& origin) {
  Document doc;
  std::istringstream is(text);
  std::string line;
  std::string current;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw IoError(origin + ":" + std::to_string(lineno) + ": unterminated section header");
      current = trim(line.substr(1, line.size() - 2));
      if (current.empty())
        throw IoError(origin + ":" + std::to_string(lineno) + ": empty section name");
      if (doc.count(current))
        throw IoError(origin + ":" + std::to_string(lineno) + ": duplicate section [" + current + "]");
      doc[current].line = lineno;
      continue;
    }
    if (current.empty())
      throw IoError(origin + ":" + std::to_string(lineno) + ": content before any [section]");
    size_t eq = line.find('=');
    // A key=value line has an identifier before '='; data rows never do.
    bool is_kv = false;
    if (eq != std::string::npos) {
      std::string key = trim(line.substr(0, eq));
      is_kv = !key.empty() && key.find(' ') == std::string::npos &&
              key.find('\t') == std::string::npos;
      if (is_kv) {
        std::string value = trim(line.substr(eq + 1));
        if (!value.empty() && value.front() == '"' && value.back() == '"' && value.size() >= 2)
          value = value.substr(1, value.size() - 2);
        Section& sec = doc[current];
        if (sec.kv.count(key))
          throw IoError(origin + ":" + std::to_string(lineno) + ": duplicate key '" + key + "'");
        sec.kv[key] = value;
      }
    }
    if (!is_kv) {
      doc[current].rows.push_back(split_ws(line));
      doc[current].row_lines.push_back(lineno);
    }
  }
  return doc;
}

class Reader {
public:
  Reader(Document doc, std::string origin) : doc_(std::move(doc)), origin_(std::move(origin)) {}

  bool has(const std::string& name) { return doc_.count(name) != 0; }

  Section* section(const std::string& name) {
    auto it = doc_.find(name);
    if (it == doc_.end()) return nullptr;
    it->second.used = true;
    return &it->second;
  }

  Section& require(const std::string& name) {
    Section* s = section(name);
    if (!s) throw IoError(origin_ + ": missing required section [" + name + "]");
    return *s;
  }

  [[noreturn]] void fail_row(const Section& sec, size_t row, const std::string& msg) {
    int ln = row < sec.row_lines.size() ? sec.row_lines[row] : sec.line;
    throw IoError(origin_ + ":" + std::to_string(ln) + ": " + msg);
  }

  double num(const Section& sec, const std::string& key) {
    auto it = sec.kv.find(key);
    if (it == sec.kv.end())
      throw IoError(origin_ + ": section at line " + std::to_string(sec.line) +
                    " is missing key '" + key + "'");
    return to_double(it->second, key);
  }

  double num_or(const Section& sec, const std::string& key, double fallback) {
    auto it = sec.kv.find(key);
    return it == sec.kv.end() ? fallback : to_double(it->second, key);
  }

  std::optional<double> num_opt(const Section* sec, const std::string& key) {
    if (!sec) return std::nullopt;
    auto it = sec->kv.find(key);
    if (it == sec->kv.end()) return std::nullopt;
    return to_double(it->second, key);
  }

  double to_double(const std::string& text, const std::string& what) {
    try {
      size_t pos = 0;
      double v = std::stod(text, &pos);
      if (pos != text.size()) throw std::invalid_argument(text);
      return v;
    } catch (const std::exception&) {
      throw IoError(origin_ + ": value '" + text + "' for '" + what + "' is not a number");
    }
  }

  void check_all_used() {
    for (const auto& [name, sec] : doc_) {
      if (!sec.used)
        throw IoError(origin_ + ":" + std::to_string(sec.line) + ": unknown section [" + name +
                      "]");
    }
  }

  const std::string& origin() const { return origin_; }

private:
  Document doc_;
  std::string origin_;
};

double row_num(Reader& rd, const Section& sec, size_t row, size_t col) {
  const auto& r = sec.rows[row];
  if (col >= r.size()) rd.fail_row(sec, row, "row has too few columns");
  return rd.to_double(r[col], "column " + std::to_string(col + 1));
}

int row_int(Reader& rd, const Section& sec, size_t row, size_t col) {
  double v = row_num(rd, sec, row, col);
  int i = static_cast<int>(v);
  if (static_cast<double>(i) != v) rd.fail_row(sec, row, "expected an integer");
  return i;
}

struct UnitScales {
  // published-unit multipliers applied at load; identity when internal
  double line_rx = 1e-3;   // ohm -> kOhm
  double gen_a = 1e-6;     // $/MW^2 h -> $/kW^2 h
  double gen_b = 1e-3;     // $/MWh -> $/kWh
  double gen_p = 1e3;      // MW -> kW
};

TransportNetwork read_transport(Reader& rd, std::map<int, int>& node_index) {
  TransportNetwork tr;
  if (rd.has("transport.grid_city")) {
    if (rd.has("transport.nodes") || rd.has("transport.edges"))
      throw IoError(rd.origin() + ": [transport.grid_city] excludes explicit transport sections");
    Section& g = rd.require("transport.grid_city");
    GridCityParams p;
    p.rows = static_cast<int>(rd.num(g, "rows"));
    p.cols = static_cast<int>(rd.num(g, "cols"));
    p.spacing_km = rd.num_or(g, "spacing_km", p.spacing_km);
    p.speed_kmh = rd.num_or(g, "speed_kmh", p.speed_kmh);
    p.kappa_veh_per_km = rd.num_or(g, "kappa_veh_per_km", p.kappa_veh_per_km);
    p.road_cap = rd.num_or(g, "road_cap", p.road_cap);
    p.background_low = rd.num_or(g, "background_low", p.background_low);
    p.background_high = rd.num_or(g, "background_high", p.background_high);
    p.seed = static_cast<std::uint64_t>(rd.num_or(g, "seed", 0));
    tr = generate_grid_city(p);
  } else {
    Section& nodes = rd.require("transport.nodes");
    for (size_t i = 0; i < nodes.rows.size(); ++i) {
      int id = row_int(rd, nodes, i, 0);
      if (node_index.count(id)) rd.fail_row(nodes, i, "duplicate node id " + std::to_string(id));
      node_index[id] = static_cast<int>(tr.node_ids.size());
      tr.node_ids.push_back(id);
    }
    tr.n_nodes = static_cast<int>(tr.node_ids.size());
    Section& edges = rd.require("transport.edges");
    for (size_t i = 0; i < edges.rows.size(); ++i) {
      RoadEdge e;
      e.id = row_int(rd, edges, i, 0);
      int tail_id = row_int(rd, edges, i, 1);
      int head_id = row_int(rd, edges, i, 2);
      if (!node_index.count(tail_id) || !node_index.count(head_id))
        rd.fail_row(edges, i, "edge " + std::to_string(e.id) + " references an unknown node");
      e.tail = node_index[tail_id];
      e.head = node_index[head_id];
      e.eta = row_num(rd, edges, i, 3);
      e.kappa = row_num(rd, edges, i, 4);
      e.background = row_num(rd, edges, i, 5);
      e.cap = row_num(rd, edges, i, 6);
      tr.edges.push_back(e);
    }
  }
  if (node_index.empty())
    for (int i = 0; i < tr.n_nodes; ++i) node_index[tr.node_ids[i]] = i;

  Section& bpr = rd.require("bpr");
  tr.bpr.pi = rd.num(bpr, "pi");
  tr.bpr.xi = rd.num(bpr, "xi");
  return tr;
}

DistributionNetwork read_grid(Reader& rd, const UnitScales& us, std::map<int, int>& bus_index) {
  DistributionNetwork gr;
  Section& buses = rd.require("grid.buses");
  for (size_t i = 0; i < buses.rows.size(); ++i) {
    BusSpec b;
    b.id = row_int(rd, buses, i, 0);
    if (bus_index.count(b.id)) rd.fail_row(buses, i, "duplicate bus id " + std::to_string(b.id));
    b.p_load = row_num(rd, buses, i, 1);
    b.q_load = row_num(rd, buses, i, 2);
    b.v_min = row_num(rd, buses, i, 3);
    b.v_max = row_num(rd, buses, i, 4);
    b.is_substation = row_int(rd, buses, i, 5) != 0;
    bus_index[b.id] = static_cast<int>(gr.buses.size());
    if (b.is_substation) gr.substation = static_cast<int>(gr.buses.size());
    gr.buses.push_back(b);
  }

  Section& lines = rd.require("grid.lines");
  for (size_t i = 0; i < lines.rows.size(); ++i) {
    LineSpec ln;
    int from_id = row_int(rd, lines, i, 0);
    int to_id = row_int(rd, lines, i, 1);
    if (!bus_index.count(from_id) || !bus_index.count(to_id))
      rd.fail_row(lines, i, "line references an unknown bus");
    ln.from_bus = bus_index[from_id];
    ln.to_bus = bus_index[to_id];
    ln.r = row_num(rd, lines, i, 2) * us.line_rx;
    ln.x = row_num(rd, lines, i, 3) * us.line_rx;
    ln.s_max = row_num(rd, lines, i, 4);
    gr.lines.push_back(ln);
  }

  if (Section* gens = rd.section("grid.generators")) {
    for (size_t i = 0; i < gens->rows.size(); ++i) {
      GeneratorSpec g;
      g.id = row_int(rd, *gens, i, 0);
      int bus_id = row_int(rd, *gens, i, 1);
      if (!bus_index.count(bus_id))
        rd.fail_row(*gens, i, "generator " + std::to_string(g.id) + " references an unknown bus");
      g.bus = bus_index[bus_id];
      g.a = row_num(rd, *gens, i, 2) * us.gen_a;
      g.b = row_num(rd, *gens, i, 3) * us.gen_b;
      g.c = row_num(rd, *gens, i, 4);
      g.p_min = row_num(rd, *gens, i, 5) * us.gen_p;
      g.p_max = row_num(rd, *gens, i, 6) * us.gen_p;
      g.q_min = row_num(rd, *gens, i, 7) * us.gen_p;
      g.q_max = row_num(rd, *gens, i, 8) * us.gen_p;
      gr.generators.push_back(g);
    }
  }
  return gr;
}

}  // namespace

Scenario parse_scenario(const std::string& text, const std::string& origin) {
  Reader rd(parse_document(text, origin), origin);
  Scenario sc;

  UnitScales us;
  if (Section* meta = rd.section("meta")) {
    auto it = meta->kv.find("name");
    if (it != meta->kv.end()) sc.name = it->second;
    auto un = meta->kv.find("units");
    if (un != meta->kv.end()) {
      if (un->second == "internal")
        us = UnitScales{1.0, 1.0, 1.0, 1.0};
      else if (un->second != "published")
        throw IoError(origin + ": units must be 'published' or 'internal'");
    }
  }

  std::map<int, int> node_index;
  sc.transport = read_transport(rd, node_index);

  std::map<int, int> bus_index;
  sc.grid = read_grid(rd, us, bus_index);

  std::map<int, int> station_index;
  Section& stations = rd.require("stations");
  for (size_t i = 0; i < stations.rows.size(); ++i) {
    StationSpec s;
    s.id = row_int(rd, stations, i, 0);
    if (station_index.count(s.id))
      rd.fail_row(stations, i, "duplicate station id " + std::to_string(s.id));
    int node_id = row_int(rd, stations, i, 1);
    int bus_id = row_int(rd, stations, i, 2);
    if (!node_index.count(node_id))
      rd.fail_row(stations, i, "station " + std::to_string(s.id) + " placed at unknown node");
    if (!bus_index.count(bus_id))
      rd.fail_row(stations, i, "station " + std::to_string(s.id) + " attached to unknown bus");
    s.node = node_index[node_id];
    s.bus = bus_index[bus_id];
    s.cap_energy = row_num(rd, stations, i, 3);
    s.zeta = row_num(rd, stations, i, 4);
    s.gamma = row_num(rd, stations, i, 5);
    s.chargers = row_int(rd, stations, i, 6);
    station_index[s.id] = static_cast<int>(sc.stations.size());
    sc.stations.push_back(s);
  }

  const int E = static_cast<int>(sc.transport.edges.size());
  const int D = static_cast<int>(sc.stations.size());
  std::map<int, int> edge_index;
  for (int e = 0; e < E; ++e) edge_index[sc.transport.edges[e].id] = e;
  std::map<int, int> ev_index;

  if (rd.has("evs") && rd.has("ev_population"))
    throw IoError(origin + ": [evs] and [ev_population] are mutually exclusive");

  if (Section* pop = rd.section("ev_population")) {
    PopulationParams p;
    p.count = static_cast<int>(rd.num(*pop, "count"));
    p.seed = static_cast<std::uint64_t>(rd.num_or(*pop, "seed", 0));
    p.q_low = rd.num_or(*pop, "q_low", p.q_low);
    p.q_high = rd.num_or(*pop, "q_high", p.q_high);
    p.omega_low = rd.num_or(*pop, "omega_low", p.omega_low);
    p.omega_high = rd.num_or(*pop, "omega_high", p.omega_high);
    p.alpha = rd.num_or(*pop, "alpha", p.alpha);
    p.beta = rd.num_or(*pop, "beta", p.beta);
    sc.evs = generate_population(sc.transport, sc.stations, p);
  } else if (Section* evs = rd.section("evs")) {
    for (size_t i = 0; i < evs->rows.size(); ++i) {
      EvProfile ev;
      ev.id = row_int(rd, *evs, i, 0);
      if (ev_index.count(ev.id)) rd.fail_row(*evs, i, "duplicate ev id " + std::to_string(ev.id));
      int origin_id = row_int(rd, *evs, i, 1);
      if (!node_index.count(origin_id))
        rd.fail_row(*evs, i, "ev " + std::to_string(ev.id) + " starts at unknown node");
      ev.origin = node_index[origin_id];
      ev.q = row_num(rd, *evs, i, 2);
      ev.omega = row_num(rd, *evs, i, 3);
      ev.alpha = row_num(rd, *evs, i, 4);
      ev.beta = row_num(rd, *evs, i, 5);
      const auto& row = evs->rows[i];
      if (row.size() < 7) rd.fail_row(*evs, i, "row has too few columns");
      if (row[6] == "all") {
        ev.feasible.resize(D);
        std::iota(ev.feasible.begin(), ev.feasible.end(), 0);
      } else {
        std::istringstream ls(row[6]);
        std::string tok;
        while (std::getline(ls, tok, ',')) {
          int sid = static_cast<int>(rd.to_double(tok, "station list"));
          if (!station_index.count(sid))
            rd.fail_row(*evs, i, "ev " + std::to_string(ev.id) + " lists unknown station " + tok);
          ev.feasible.push_back(station_index[sid]);
        }
        std::sort(ev.feasible.begin(), ev.feasible.end());
        ev.feasible.erase(std::unique(ev.feasible.begin(), ev.feasible.end()), ev.feasible.end());
      }
      ev_index[ev.id] = static_cast<int>(sc.evs.size());
      sc.evs.push_back(std::move(ev));
    }

    Section* pr = rd.section("evs.pref_route");
    Section* ps = rd.section("evs.pref_station");
    std::set<int> explicit_pref;
    if (ps)
      for (size_t i = 0; i < ps->rows.size(); ++i) explicit_pref.insert(row_int(rd, *ps, i, 0));
    if (pr)
      for (size_t i = 0; i < pr->rows.size(); ++i) explicit_pref.insert(row_int(rd, *pr, i, 0));
    for (EvProfile& ev : sc.evs) {
      if (explicit_pref.count(ev.id)) {
        ev.pref_route = Eigen::VectorXd::Zero(E);
        ev.pref_station = Eigen::VectorXd::Zero(D);
      } else {
        assign_auto_preferences(sc.transport, sc.stations, ev);
      }
    }
    if (ps) {
      for (size_t i = 0; i < ps->rows.size(); ++i) {
        int ev_id = row_int(rd, *ps, i, 0);
        int sid = row_int(rd, *ps, i, 1);
        if (!ev_index.count(ev_id)) rd.fail_row(*ps, i, "preference for unknown ev");
        if (!station_index.count(sid)) rd.fail_row(*ps, i, "preference for unknown station");
        sc.evs[ev_index[ev_id]].pref_station[station_index[sid]] = row_num(rd, *ps, i, 2);
      }
    }
    if (pr) {
      for (size_t i = 0; i < pr->rows.size(); ++i) {
        int ev_id = row_int(rd, *pr, i, 0);
        int eid = row_int(rd, *pr, i, 1);
        if (!ev_index.count(ev_id)) rd.fail_row(*pr, i, "preference for unknown ev");
        if (!edge_index.count(eid)) rd.fail_row(*pr, i, "preference for unknown edge");
        sc.evs[ev_index[ev_id]].pref_route[edge_index[eid]] = row_num(rd, *pr, i, 2);
      }
    }
  }

  if (Section* so = rd.section("solver")) {
    SolverSettings& s = sc.solver;
    s.tau = rd.num_opt(so, "tau");
    s.tau0 = rd.num_opt(so, "tau0");
    s.mu = rd.num_opt(so, "mu");
    s.mu_nodal = rd.num_opt(so, "mu_nodal");
    s.mu_road = rd.num_opt(so, "mu_road");
    s.mu_station = rd.num_opt(so, "mu_station");
    s.theta = rd.num_opt(so, "theta");
    s.eps_primal = rd.num_opt(so, "eps_primal");
    s.eps_feas = rd.num_opt(so, "eps_feas");
    s.eps_dual = rd.num_opt(so, "eps_dual");
    s.eps_inner = rd.num_opt(so, "eps_inner");
    if (auto v = rd.num_opt(so, "max_iters")) s.max_iters = static_cast<int>(*v);
    if (auto v = rd.num_opt(so, "max_inner")) s.max_inner = static_cast<int>(*v);
    if (auto v = rd.num_opt(so, "seed")) s.seed = static_cast<std::uint64_t>(*v);
    if (auto v = rd.num_opt(so, "station_price_lag")) s.station_price_lag = (*v != 0.0);
  }

  rd.check_all_used();

  {
    DistributionNetwork oriented = sc.grid;
    validate_radial(oriented);
    sc.grid = oriented;  // keep parent->child orientation
  }
  validate_scenario(sc);
  return sc;
}

Scenario load_scenario(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open scenario file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_scenario(buf.str(), path);
}

namespace {

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

std::string serialize_scenario(const Scenario& sc) {
  std::ostringstream os;
  os << "[meta]\n";
  if (!sc.name.empty()) os << "name = \"" << sc.name << "\"\n";
  os << "units = internal\n\n";

  os << "[bpr]\npi = " << fmt(sc.transport.bpr.pi) << "\nxi = " << fmt(sc.transport.bpr.xi)
     << "\n\n";

  os << "[transport.nodes]\n";
  for (int id : sc.transport.node_ids) os << id << "\n";
  os << "\n[transport.edges]\n# id tail head eta kappa background cap\n";
  for (const RoadEdge& e : sc.transport.edges) {
    os << e.id << " " << sc.transport.node_ids[e.tail] << " " << sc.transport.node_ids[e.head]
       << " " << fmt(e.eta) << " " << fmt(e.kappa) << " " << fmt(e.background) << " " << fmt(e.cap)
       << "\n";
  }

  os << "\n[stations]\n# id node bus cap_energy zeta gamma chargers\n";
  for (const StationSpec& s : sc.stations) {
    os << s.id << " " << sc.transport.node_ids[s.node] << " " << sc.grid.buses[s.bus].id << " "
       << fmt(s.cap_energy) << " " << fmt(s.zeta) << " " << fmt(s.gamma) << " " << s.chargers
       << "\n";
  }

  os << "\n[grid.buses]\n# id p_load q_load v_min v_max substation\n";
  for (const BusSpec& b : sc.grid.buses) {
    os << b.id << " " << fmt(b.p_load) << " " << fmt(b.q_load) << " " << fmt(b.v_min) << " "
       << fmt(b.v_max) << " " << (b.is_substation ? 1 : 0) << "\n";
  }

  os << "\n[grid.lines]\n# from to r x s_max\n";
  for (const LineSpec& ln : sc.grid.lines) {
    os << sc.grid.buses[ln.from_bus].id << " " << sc.grid.buses[ln.to_bus].id << " " << fmt(ln.r)
       << " " << fmt(ln.x) << " " << fmt(ln.s_max) << "\n";
  }

  if (!sc.grid.generators.empty()) {
    os << "\n[grid.generators]\n# id bus a b c p_min p_max q_min q_max\n";
    for (const GeneratorSpec& g : sc.grid.generators) {
      os << g.id << " " << sc.grid.buses[g.bus].id << " " << fmt(g.a) << " " << fmt(g.b) << " "
         << fmt(g.c) << " " << fmt(g.p_min) << " " << fmt(g.p_max) << " " << fmt(g.q_min) << " "
         << fmt(g.q_max) << "\n";
    }
  }

  if (!sc.evs.empty()) {
    os << "\n[evs]\n# id origin q omega alpha beta stations\n";
    for (const EvProfile& ev : sc.evs) {
      os << ev.id << " " << sc.transport.node_ids[ev.origin] << " " << fmt(ev.q) << " "
         << fmt(ev.omega) << " " << fmt(ev.alpha) << " " << fmt(ev.beta) << " ";
      for (size_t k = 0; k < ev.feasible.size(); ++k)
        os << (k ? "," : "") << sc.stations[ev.feasible[k]].id;
      os << "\n";
    }
    os << "\n[evs.pref_station]\n# ev station value\n";
    for (const EvProfile& ev : sc.evs)
      for (int d = 0; d < ev.pref_station.size(); ++d)
        if (ev.pref_station[d] != 0.0)
          os << ev.id << " " << sc.stations[d].id << " " << fmt(ev.pref_station[d]) << "\n";
    os << "\n[evs.pref_route]\n# ev edge value\n";
    for (const EvProfile& ev : sc.evs)
      for (int e = 0; e < ev.pref_route.size(); ++e)
        if (ev.pref_route[e] != 0.0)
          os << ev.id << " " << sc.transport.edges[e].id << " " << fmt(ev.pref_route[e]) << "\n";
  }

  std::ostringstream so;
  const SolverSettings& s = sc.solver;
  auto put = [&](const char* key, const auto& opt) {
    if (opt) so << key << " = " << fmt(static_cast<double>(*opt)) << "\n";
  };
  put("tau", s.tau);
  put("tau0", s.tau0);
  put("mu", s.mu);
  put("mu_nodal", s.mu_nodal);
  put("mu_road", s.mu_road);
  put("mu_station", s.mu_station);
  put("theta", s.theta);
  put("eps_primal", s.eps_primal);
  put("eps_feas", s.eps_feas);
  put("eps_dual", s.eps_dual);
  put("eps_inner", s.eps_inner);
  put("max_iters", s.max_iters);
  put("max_inner", s.max_inner);
  put("seed", s.seed);
  if (s.station_price_lag) so << "station_price_lag = " << (*s.station_price_lag ? 1 : 0) << "\n";
  std::string body = so.str();
  if (!body.empty()) os << "\n[solver]\n" << body;

  return os.str();
}

}  // namespace vgwe::net
