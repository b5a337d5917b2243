#include "smolhom/config.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "smolhom/cell_problem.hpp"
#include "smolhom/errors.hpp"

namespace smolhom {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& path, const std::string& msg) {
  throw ConfigError("config: " + path + ": " + msg);
}

void expect_object(const json& j, const std::string& path) {
  if (!j.is_object()) fail(path, "expected an object");
}

void check_keys(const json& j, const std::string& path, const std::set<std::string>& allowed) {
  expect_object(j, path);
  for (const auto& [key, value] : j.items()) {
    (void)value;
    if (!allowed.count(key)) fail(path + "." + key, "unknown key (strict mode)");
  }
}

double get_number(const json& j, const std::string& path) {
  if (!j.is_number()) fail(path, "expected a number");
  return j.get<double>();
}

int get_int(const json& j, const std::string& path) {
  if (!j.is_number_integer()) fail(path, "expected an integer");
  return j.get<int>();
}

Vec2 get_point(const json& j, const std::string& path) {
  if (!j.is_array() || j.size() != 2) fail(path, "expected [x, y]");
  return {get_number(j[0], path + "[0]"), get_number(j[1], path + "[1]")};
}

InclusionShape parse_inclusion(const json& j, const std::string& path) {
  check_keys(j, path, {"kind", "center", "radius", "vertices"});
  InclusionShape shape;
  const std::string kind = j.value("kind", "disk");
  if (kind == "none") {
    shape.kind = InclusionKind::none;
  } else if (kind == "disk") {
    shape.kind = InclusionKind::disk;
    if (j.contains("center")) shape.center = get_point(j["center"], path + ".center");
    if (!j.contains("radius")) fail(path + ".radius", "disk inclusion needs a radius");
    shape.radius = get_number(j["radius"], path + ".radius");
  } else if (kind == "polygon") {
    shape.kind = InclusionKind::polygon;
    if (!j.contains("vertices")) fail(path + ".vertices", "polygon inclusion needs vertices");
    const json& verts = j["vertices"];
    if (!verts.is_array()) fail(path + ".vertices", "expected an array of points");
    for (std::size_t i = 0; i < verts.size(); ++i) {
      shape.vertices.push_back(get_point(verts[i], path + ".vertices[" + std::to_string(i) + "]"));
    }
  } else {
    fail(path + ".kind", "must be one of: none, disk, polygon");
  }
  return shape;
}

Kernel parse_kernel(const json& j, const std::string& path, int M) {
  check_keys(j, path, {"kind", "value", "values"});
  const std::string kind = j.value("kind", "constant");
  if (kind == "constant") {
    return Kernel::constant(M, j.contains("value") ? get_number(j["value"], path + ".value") : 1.0);
  }
  if (kind == "sum") return Kernel::sum(M);
  if (kind == "product") return Kernel::product(M);
  if (kind == "dense") {
    if (!j.contains("values")) fail(path + ".values", "dense kernel needs values");
    std::vector<std::vector<double>> rows;
    const json& vals = j["values"];
    if (!vals.is_array() || static_cast<int>(vals.size()) != M) {
      fail(path + ".values", "dense kernel must be an MxM matrix");
    }
    for (std::size_t r = 0; r < vals.size(); ++r) {
      const json& row = vals[r];
      if (!row.is_array() || static_cast<int>(row.size()) != M) {
        fail(path + ".values[" + std::to_string(r) + "]", "dense kernel must be an MxM matrix");
      }
      std::vector<double> out;
      for (std::size_t c = 0; c < row.size(); ++c) {
        out.push_back(get_number(row[c], path + ".values[" + std::to_string(r) + "][" +
                                             std::to_string(c) + "]"));
      }
      rows.push_back(std::move(out));
    }
    return Kernel::dense(std::move(rows));
  }
  fail(path + ".kind", "must be one of: constant, sum, product, dense");
}

std::vector<double> parse_per_species(const json& j, const std::string& path, int M) {
  std::vector<double> out;
  if (j.is_number()) {
    out.assign(M, j.get<double>());
  } else if (j.is_array()) {
    if (static_cast<int>(j.size()) != M) fail(path, "array must have one entry per species");
    for (std::size_t i = 0; i < j.size(); ++i) {
      out.push_back(get_number(j[i], path + "[" + std::to_string(i) + "]"));
    }
  } else {
    fail(path, "expected a number or a per-species array");
  }
  return out;
}

TransmissionCoefficient parse_transmission_one(const json& j, const std::string& path) {
  if (j.is_number()) return {j.get<double>(), 0.0, 0.0};
  check_keys(j, path, {"c0", "cx", "cz"});
  TransmissionCoefficient c;
  if (j.contains("c0")) c.c0 = get_number(j["c0"], path + ".c0");
  if (j.contains("cx")) c.cx = get_number(j["cx"], path + ".cx");
  if (j.contains("cz")) c.cz = get_number(j["cz"], path + ".cz");
  return c;
}

std::vector<TransmissionCoefficient> parse_transmission(const json& j, const std::string& path,
                                                        int M) {
  std::vector<TransmissionCoefficient> out;
  if (j.is_array()) {
    if (static_cast<int>(j.size()) != M) fail(path, "array must have one entry per species");
    for (std::size_t i = 0; i < j.size(); ++i) {
      out.push_back(parse_transmission_one(j[i], path + "[" + std::to_string(i) + "]"));
    }
  } else {
    out.assign(M, parse_transmission_one(j, path));
  }
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (out[i].c0 < 0.0) fail(path, "transmission coefficient c0 must be >= 0");
  }
  return out;
}

AnalyticField parse_field(const json& j, const std::string& path) {
  if (j.is_number()) {
    AnalyticField f;
    f.kind = AnalyticField::Kind::constant;
    f.value = j.get<double>();
    return f;
  }
  check_keys(j, path, {"kind", "value", "base", "amp", "center", "sigma"});
  AnalyticField f;
  const std::string kind = j.value("kind", "constant");
  if (kind == "constant") {
    f.kind = AnalyticField::Kind::constant;
    f.value = j.contains("value") ? get_number(j["value"], path + ".value") : 0.0;
  } else if (kind == "gaussian") {
    f.kind = AnalyticField::Kind::gaussian;
    if (j.contains("base")) f.base = get_number(j["base"], path + ".base");
    f.amp = j.contains("amp") ? get_number(j["amp"], path + ".amp") : 1.0;
    if (j.contains("center")) f.center = get_point(j["center"], path + ".center");
    if (j.contains("sigma")) f.sigma = get_number(j["sigma"], path + ".sigma");
    if (!(f.sigma > 0.0)) fail(path + ".sigma", "must be > 0");
  } else if (kind == "cell_modulated") {
    f.kind = AnalyticField::Kind::cell_modulated;
    f.base = j.contains("base") ? get_number(j["base"], path + ".base") : 1.0;
    f.amp = j.contains("amp") ? get_number(j["amp"], path + ".amp") : 0.5;
    if (std::abs(f.amp) > 1.0) fail(path + ".amp", "modulation amplitude must satisfy |amp| <= 1");
  } else {
    fail(path + ".kind", "must be one of: constant, gaussian, cell_modulated");
  }
  return f;
}

json field_json(const AnalyticField& f) {
  switch (f.kind) {
    case AnalyticField::Kind::constant:
      return {{"kind", "constant"}, {"value", f.value}};
    case AnalyticField::Kind::gaussian:
      return {{"kind", "gaussian"}, {"base", f.base},     {"amp", f.amp},
              {"center", {f.center.x, f.center.y}},       {"sigma", f.sigma}};
    case AnalyticField::Kind::cell_modulated:
      return {{"kind", "cell_modulated"}, {"base", f.base}, {"amp", f.amp}};
  }
  return {};
}

json kernel_json(const Kernel& k) {
  json rows = json::array();
  for (int i = 0; i < k.size(); ++i) {
    json row = json::array();
    for (int j = 0; j < k.size(); ++j) row.push_back(k(i, j));
    rows.push_back(row);
  }
  return rows;
}

}  // namespace

Config parse_config(const json& input) {
  const json* root = &input;
  // A finalized manifest carries the resolved config under "config";
  // re-running from a manifest reproduces the run.
  if (input.is_object() && input.contains("config") && input.contains("manifest_version")) {
    root = &input["config"];
  }
  const json& j = *root;
  check_keys(j, "$", {"schema_version", "geometry", "domain", "kinetics", "data", "time",
                      "mesh", "study", "check", "output"});
  if (!j.contains("schema_version")) fail("$.schema_version", "required");
  const int version = get_int(j["schema_version"], "$.schema_version");
  if (version != kSchemaVersion) {
    fail("$.schema_version", "unsupported version " + std::to_string(version));
  }

  Config cfg;

  cfg.inclusion.kind = InclusionKind::disk;
  cfg.inclusion.center = {0.5, 0.5};
  cfg.inclusion.radius = 0.25;
  if (j.contains("geometry")) {
    check_keys(j["geometry"], "$.geometry", {"inclusion"});
    if (j["geometry"].contains("inclusion")) {
      cfg.inclusion = parse_inclusion(j["geometry"]["inclusion"], "$.geometry.inclusion");
    }
  }

  if (j.contains("domain")) {
    const json& d = j["domain"];
    check_keys(d, "$.domain", {"width", "height", "epsilon", "L", "nz"});
    if (d.contains("width")) cfg.width = get_number(d["width"], "$.domain.width");
    if (d.contains("height")) cfg.height = get_number(d["height"], "$.domain.height");
    if (d.contains("epsilon")) cfg.epsilon = get_number(d["epsilon"], "$.domain.epsilon");
    if (d.contains("L")) cfg.z_extent = get_number(d["L"], "$.domain.L");
    if (d.contains("nz")) cfg.nz = get_int(d["nz"], "$.domain.nz");
  }
  if (cfg.nz < 1) fail("$.domain.nz", "must be >= 1");
  if (cfg.nz > 1 && !(cfg.z_extent > 0.0)) fail("$.domain.L", "nz > 1 requires L > 0");

  int M = 2;
  const json kin = j.contains("kinetics") ? j["kinetics"] : json::object();
  check_keys(kin, "$.kinetics",
             {"M", "a", "b", "D", "Dz", "d", "c", "truncation", "allow_degenerate_kernels"});
  if (kin.contains("M")) M = get_int(kin["M"], "$.kinetics.M");
  if (M < 2 || M > 256) fail("$.kinetics.M", "must lie in [2, 256]");
  cfg.kinetics.M = M;
  cfg.kinetics.a = kin.contains("a") ? parse_kernel(kin["a"], "$.kinetics.a", M)
                                     : Kernel::constant(M, 1.0);
  cfg.kinetics.b = kin.contains("b") ? parse_kernel(kin["b"], "$.kinetics.b", M)
                                     : Kernel::constant(M, 1.0);
  cfg.kinetics.D = kin.contains("D") ? parse_per_species(kin["D"], "$.kinetics.D", M)
                                     : std::vector<double>(M, 1.0);
  cfg.kinetics.Dz = kin.contains("Dz") ? parse_per_species(kin["Dz"], "$.kinetics.Dz", M)
                                       : std::vector<double>(M, 1.0);
  cfg.kinetics.d = kin.contains("d") ? parse_per_species(kin["d"], "$.kinetics.d", M)
                                     : std::vector<double>(M, 1.0);
  cfg.kinetics.c = kin.contains("c") ? parse_transmission(kin["c"], "$.kinetics.c", M)
                                     : std::vector<TransmissionCoefficient>(
                                           M, TransmissionCoefficient{1.0, 0.0, 0.0});
  if (kin.contains("truncation") && !kin["truncation"].is_null()) {
    cfg.kinetics.truncation = get_number(kin["truncation"], "$.kinetics.truncation");
  }
  if (kin.contains("allow_degenerate_kernels")) {
    if (!kin["allow_degenerate_kernels"].is_boolean()) {
      fail("$.kinetics.allow_degenerate_kernels", "expected a boolean");
    }
    cfg.kinetics.allow_degenerate_kernels = kin["allow_degenerate_kernels"].get<bool>();
  }
  cfg.non_paper_regime =
      cfg.kinetics.allow_degenerate_kernels &&
      (cfg.kinetics.a.min_entry() <= 0.0 || cfg.kinetics.b.min_entry() <= 0.0);
  try {
    cfg.kinetics.validate();
  } catch (const ConfigError& e) {
    fail("$.kinetics", e.what());
  }

  cfg.initial_monomer.kind = AnalyticField::Kind::constant;
  cfg.initial_monomer.value = 1.0;
  cfg.source.kind = AnalyticField::Kind::constant;
  cfg.source.value = 0.0;
  if (j.contains("data")) {
    const json& d = j["data"];
    check_keys(d, "$.data", {"U1", "f", "sampling"});
    if (d.contains("U1")) cfg.initial_monomer = parse_field(d["U1"], "$.data.U1");
    if (d.contains("f")) cfg.source = parse_field(d["f"], "$.data.f");
    if (d.contains("sampling")) {
      const std::string s = d["sampling"].get<std::string>();
      if (s == "two_scale") {
        cfg.sampling = MicroSampling::two_scale;
      } else if (s == "macro_only") {
        cfg.sampling = MicroSampling::macro_only;
      } else {
        fail("$.data.sampling", "must be two_scale or macro_only");
      }
    }
  }

  if (j.contains("time")) {
    const json& t = j["time"];
    check_keys(t, "$.time", {"T", "dt", "snapshot_every"});
    if (t.contains("T")) cfg.T = get_number(t["T"], "$.time.T");
    if (t.contains("dt")) cfg.dt = get_number(t["dt"], "$.time.dt");
    if (t.contains("snapshot_every")) {
      cfg.snapshot_every = get_int(t["snapshot_every"], "$.time.snapshot_every");
    }
  }
  if (cfg.T < 0.0) fail("$.time.T", "must be >= 0");
  if (!(cfg.dt > 0.0)) fail("$.time.dt", "must be > 0");
  if (cfg.snapshot_every < 0) fail("$.time.snapshot_every", "must be >= 0");

  if (j.contains("mesh")) {
    const json& m = j["mesh"];
    check_keys(m, "$.mesh", {"cell_divisions", "macro_divisions", "tensor_divisions"});
    if (m.contains("cell_divisions")) {
      cfg.cell_divisions = get_int(m["cell_divisions"], "$.mesh.cell_divisions");
    }
    if (m.contains("macro_divisions")) {
      cfg.macro_divisions = get_int(m["macro_divisions"], "$.mesh.macro_divisions");
    }
    if (m.contains("tensor_divisions")) {
      cfg.tensor_divisions = get_int(m["tensor_divisions"], "$.mesh.tensor_divisions");
    }
  }
  if (cfg.cell_divisions < 4) fail("$.mesh.cell_divisions", "must be >= 4");
  if (cfg.macro_divisions < 1) fail("$.mesh.macro_divisions", "must be >= 1");
  if (cfg.tensor_divisions < 4) fail("$.mesh.tensor_divisions", "must be >= 4");

  if (j.contains("study")) {
    const json& s = j["study"];
    check_keys(s, "$.study", {"epsilons"});
    if (s.contains("epsilons")) {
      const json& eps = s["epsilons"];
      if (!eps.is_array() || eps.empty()) fail("$.study.epsilons", "expected a non-empty array");
      for (std::size_t i = 0; i < eps.size(); ++i) {
        cfg.study_epsilons.push_back(get_number(eps[i], "$.study.epsilons[" + std::to_string(i) + "]"));
      }
      for (std::size_t i = 1; i < cfg.study_epsilons.size(); ++i) {
        if (!(cfg.study_epsilons[i] < cfg.study_epsilons[i - 1])) {
          fail("$.study.epsilons", "must be strictly decreasing");
        }
      }
    }
  }
  if (cfg.study_epsilons.empty()) cfg.study_epsilons = {0.5, 0.25, 0.125};

  if (j.contains("check")) {
    check_keys(j["check"], "$.check", {"target"});
    if (j["check"].contains("target")) {
      cfg.check_target = j["check"]["target"].get<std::string>();
      if (cfg.check_target != "micro" && cfg.check_target != "macro") {
        fail("$.check.target", "must be micro or macro");
      }
    }
  }

  if (j.contains("output")) {
    const json& o = j["output"];
    check_keys(o, "$.output", {"run_id", "fields"});
    if (o.contains("run_id")) cfg.run_id = o["run_id"].get<std::string>();
    if (o.contains("fields")) {
      if (!o["fields"].is_boolean()) fail("$.output.fields", "expected a boolean");
      cfg.export_fields = o["fields"].get<bool>();
    }
  }

  // Echo of every resolved value, usable as a config again.
  json inc;
  switch (cfg.inclusion.kind) {
    case InclusionKind::none:
      inc = {{"kind", "none"}};
      break;
    case InclusionKind::disk:
      inc = {{"kind", "disk"},
             {"center", {cfg.inclusion.center.x, cfg.inclusion.center.y}},
             {"radius", cfg.inclusion.radius}};
      break;
    case InclusionKind::polygon: {
      json verts = json::array();
      for (const Vec2& v : cfg.inclusion.vertices) verts.push_back({v.x, v.y});
      inc = {{"kind", "polygon"}, {"vertices", verts}};
      break;
    }
  }
  json ctrans = json::array();
  for (const auto& c : cfg.kinetics.c) {
    ctrans.push_back({{"c0", c.c0}, {"cx", c.cx}, {"cz", c.cz}});
  }
  cfg.resolved = {
      {"schema_version", kSchemaVersion},
      {"geometry", {{"inclusion", inc}}},
      {"domain",
       {{"width", cfg.width},
        {"height", cfg.height},
        {"epsilon", cfg.epsilon},
        {"L", cfg.z_extent},
        {"nz", cfg.nz}}},
      {"kinetics",
       {{"M", cfg.kinetics.M},
        {"a", {{"kind", "dense"}, {"values", kernel_json(cfg.kinetics.a)}}},
        {"b", {{"kind", "dense"}, {"values", kernel_json(cfg.kinetics.b)}}},
        {"D", cfg.kinetics.D},
        {"Dz", cfg.kinetics.Dz},
        {"d", cfg.kinetics.d},
        {"c", ctrans},
        {"truncation", cfg.kinetics.truncation ? json(*cfg.kinetics.truncation) : json(nullptr)},
        {"allow_degenerate_kernels", cfg.kinetics.allow_degenerate_kernels}}},
      {"data",
       {{"U1", field_json(cfg.initial_monomer)},
        {"f", field_json(cfg.source)},
        {"sampling", cfg.sampling == MicroSampling::two_scale ? "two_scale" : "macro_only"}}},
      {"time", {{"T", cfg.T}, {"dt", cfg.dt}, {"snapshot_every", cfg.snapshot_every}}},
      {"mesh",
       {{"cell_divisions", cfg.cell_divisions},
        {"macro_divisions", cfg.macro_divisions},
        {"tensor_divisions", cfg.tensor_divisions}}},
      {"study", {{"epsilons", cfg.study_epsilons}}},
      {"check", {{"target", cfg.check_target}}},
      {"output", {{"run_id", cfg.run_id}, {"fields", cfg.export_fields}}},
  };
  return cfg;
}

Config load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open " + path);
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw ConfigError("config: " + path + ": " + e.what());
  }
  return parse_config(j);
}

MicroConfig build_micro_config(const Config& cfg) {
  const CellGeometry geom = build_cell_geometry(cfg.inclusion);
  MicroConfig mc;
  mc.domain = build_perforated_domain(geom, cfg.width, cfg.height, cfg.epsilon, cfg.z_extent);
  mc.meshes = mesh_perforated(mc.domain, cfg.epsilon / cfg.cell_divisions);
  mc.kinetics = cfg.kinetics;
  mc.source = cfg.source;
  mc.initial_monomer = cfg.initial_monomer;
  mc.sampling = cfg.sampling;
  mc.T = cfg.T;
  mc.dt = cfg.dt;
  mc.nz = cfg.nz;
  mc.snapshot_every = cfg.snapshot_every;
  return mc;
}

MacroConfig build_macro_config(const Config& cfg) {
  MacroConfig mc;
  mc.cell = build_cell_geometry(cfg.inclusion);
  mc.cell_meshes = mesh_cell(mc.cell, 1.0 / cfg.cell_divisions);
  if (mc.cell.has_inclusion()) {
    const CellMeshes fine = mesh_cell(mc.cell, 1.0 / cfg.tensor_divisions);
    mc.tensor = solve_cell_problem(fine.solid, fine.periodic, mc.cell.area_solid).tensor;
  } else {
    mc.tensor.A = {{{1.0, 0.0, 0.0}, {0.0, 1.0, 0.0}, {0.0, 0.0, 1.0}}};
    mc.tensor.solid_fraction = 1.0;
  }
  mc.macro = build_rect_mesh(cfg.width, cfg.height, cfg.macro_divisions,
                             std::max(1, static_cast<int>(std::round(
                                             cfg.macro_divisions * cfg.height / cfg.width))));
  mc.kinetics = cfg.kinetics;
  mc.source = cfg.source;
  mc.initial_monomer = cfg.initial_monomer;
  mc.T = cfg.T;
  mc.dt = cfg.dt;
  mc.nz = cfg.nz;
  mc.z_extent = cfg.z_extent;
  mc.snapshot_every = cfg.snapshot_every;
  return mc;
}

}  // namespace smolhom
