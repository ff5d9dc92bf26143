#include "tlm/config.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>

namespace tlm {

using nlohmann::json;

namespace {

std::string join_issues(const std::vector<SchemaIssue>& issues) {
  std::string s;
  for (const auto& i : issues) {
    if (!s.empty()) s += "; ";
    s += i.path + ": " + i.message;
  }
  return s;
}

class Reader {
 public:
  std::vector<SchemaIssue> issues;

  void issue(const std::string& path, const std::string& msg) { issues.push_back({path, msg}); }

  const json* member(const json& obj, const std::string& key, const std::string& path,
                     bool required) {
    if (!obj.is_object()) {
      issue(path, "expected an object");
      return nullptr;
    }
    auto it = obj.find(key);
    if (it == obj.end()) {
      if (required) issue(path + "/" + key, "required field is missing");
      return nullptr;
    }
    return &*it;
  }

  double number(const json& obj, const std::string& key, const std::string& path, double def,
                bool required = false) {
    const json* v = member(obj, key, path, required);
    if (!v) return def;
    if (!v->is_number()) {
      issue(path + "/" + key, "expected a number");
      return def;
    }
    return v->get<double>();
  }

  long integer(const json& obj, const std::string& key, const std::string& path, long def,
               bool required = false) {
    const json* v = member(obj, key, path, required);
    if (!v) return def;
    if (!v->is_number_integer()) {
      issue(path + "/" + key, "expected an integer");
      return def;
    }
    return v->get<long>();
  }

  std::string text(const json& obj, const std::string& key, const std::string& path,
                   const std::string& def, bool required = false) {
    const json* v = member(obj, key, path, required);
    if (!v) return def;
    if (!v->is_string()) {
      issue(path + "/" + key, "expected a string");
      return def;
    }
    return v->get<std::string>();
  }

  Mat matrix(const json& v, const std::string& path) {
    if (!v.is_array() || v.empty()) {
      issue(path, "expected a non-empty array of rows");
      return Mat();
    }
    const std::size_t rows = v.size();
    std::size_t cols = 0;
    for (std::size_t r = 0; r < rows; ++r) {
      if (!v[r].is_array()) {
        issue(path + "/" + std::to_string(r), "expected an array");
        return Mat();
      }
      if (r == 0) cols = v[r].size();
      if (v[r].size() != cols) {
        issue(path + "/" + std::to_string(r), "ragged matrix row");
        return Mat();
      }
    }
    Mat m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t c = 0; c < cols; ++c) {
        const json& x = v[r][c];
        if (!x.is_number()) {
          issue(path + "/" + std::to_string(r) + "/" + std::to_string(c), "expected a number");
          return Mat();
        }
        m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = x.get<double>();
      }
    }
    return m;
  }

  // A scalar s means s * I.
  Mat3 matrix3(const json& obj, const std::string& key, const std::string& path, const Mat3& def) {
    const json* v = member(obj, key, path, false);
    if (!v) return def;
    if (v->is_number()) return v->get<double>() * Mat3::Identity();
    Mat m = matrix(*v, path + "/" + key);
    if (m.size() == 0) return def;
    if (m.rows() != 3 || m.cols() != 3) {
      issue(path + "/" + key, "expected a 3x3 matrix or a scalar");
      return def;
    }
    return m;
  }

  Vec3 vector3(const json& obj, const std::string& key, const std::string& path) {
    const json* v = member(obj, key, path, false);
    if (!v) return Vec3::Zero();
    if (!v->is_array() || v->size() != 3) {
      issue(path + "/" + key, "expected a 3-vector");
      return Vec3::Zero();
    }
    Vec3 out;
    for (int i = 0; i < 3; ++i) {
      if (!(*v)[static_cast<std::size_t>(i)].is_number()) {
        issue(path + "/" + key, "expected a 3-vector of numbers");
        return Vec3::Zero();
      }
      out(i) = (*v)[static_cast<std::size_t>(i)].get<double>();
    }
    return out;
  }

  std::optional<cplx> complex_value(const json& v, const std::string& path) {
    if (v.is_number()) return cplx(v.get<double>(), 0.0);
    if (v.is_array() && v.size() == 2 && v[0].is_number() && v[1].is_number()) {
      return cplx(v[0].get<double>(), v[1].get<double>());
    }
    issue(path, "expected a number or [re, im]");
    return std::nullopt;
  }

  PortRef port_ref(const json& v, const std::string& path) {
    if (v.is_array() && v.size() == 2 && v[0].is_number_integer() && v[1].is_number_integer()) {
      return {v[0].get<int>(), v[1].get<int>()};
    }
    if (v.is_object()) {
      return {static_cast<int>(integer(v, "cell", path, 0, true)),
              static_cast<int>(integer(v, "port", path, 0, true))};
    }
    issue(path, "expected [cell, port]");
    return {};
  }

  const json* array(const json& obj, const std::string& key, const std::string& path,
                    bool required = false) {
    const json* v = member(obj, key, path, required);
    if (v && !v->is_array()) {
      issue(path + "/" + key, "expected an array");
      return nullptr;
    }
    return v;
  }
};

bool is_spd(const Mat3& m) {
  if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-12 * std::max(1.0, m.cwiseAbs().maxCoeff())) {
    return false;
  }
  return Eigen::SelfAdjointEigenSolver<Mat3>(m).eigenvalues().minCoeff() > 0.0;
}

bool is_psd(const Mat3& m) {
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) return false;
  return Eigen::SelfAdjointEigenSolver<Mat3>(m).eigenvalues().minCoeff() >= -1e-12 * scale;
}

bool valid_ref(const SimulationConfig& c, const PortRef& r) {
  return r.cell >= 0 && r.cell < static_cast<int>(c.cells.size()) && r.port >= 0 &&
         r.port < c.cells[static_cast<std::size_t>(r.cell)].port_count();
}

void parse_cell(Reader& rd, const json& j, const std::string& p, CellSpec& cell) {
  cell.kind = rd.text(j, "kind", p, "maxwell");
  if (cell.kind == "maxwell") {
    const json* b = rd.member(j, "B", p, true);
    if (b) {
      Mat m = rd.matrix(*b, p + "/B");
      if (m.size() != 0 && (m.rows() != 3 || m.cols() != 3)) {
        rd.issue(p + "/B", "expected a 3x3 matrix");
      } else if (m.size() != 0) {
        // rows of the configuration are node vectors; B stores them as columns
        cell.B = m.transpose();
        if (!(cell.B.determinant() > 0.0)) rd.issue(p + "/B", "det(B) must be positive");
      }
    }
    cell.eps_r = rd.matrix3(j, "eps_r", p, Mat3::Identity());
    cell.mu_r = rd.matrix3(j, "mu_r", p, Mat3::Identity());
    cell.kappa_e = rd.matrix3(j, "kappa_e", p, Mat3::Zero());
    cell.kappa_m = rd.matrix3(j, "kappa_m", p, Mat3::Zero());
    cell.y_e = rd.number(j, "y_e", p, 1.0, true);
    cell.y_m = rd.number(j, "y_m", p, 1.0, true);
    if (!is_spd(cell.eps_r)) rd.issue(p + "/eps_r", "must be symmetric positive definite");
    if (!is_spd(cell.mu_r)) rd.issue(p + "/mu_r", "must be symmetric positive definite");
    if (!is_psd(cell.kappa_e)) rd.issue(p + "/kappa_e", "must be symmetric positive semidefinite");
    if (!is_psd(cell.kappa_m)) rd.issue(p + "/kappa_m", "must be symmetric positive semidefinite");
    if (!(cell.y_e > 0.0)) rd.issue(p + "/y_e", "must be positive");
    if (!(cell.y_m > 0.0)) rd.issue(p + "/y_m", "must be positive");
  } else if (cell.kind == "blocks") {
    const json* k = rd.member(j, "K", p, true);
    if (k) cell.K = rd.matrix(*k, p + "/K");
    const Eigen::Index n = cell.K.rows();
    if (cell.K.rows() != cell.K.cols()) rd.issue(p + "/K", "K must be square");
    const json* l = rd.member(j, "L", p, false);
    const json* m = rd.member(j, "M", p, false);
    const json* nn = rd.member(j, "N", p, false);
    if (!l && !m && !nn) {
      cell.L = Mat::Zero(n, 0);
      cell.M = Mat::Zero(0, n);
      cell.N = Mat::Zero(0, 0);
      return;
    }
    if (!l || !m || !nn) {
      rd.issue(p, "L, M and N must be given together");
      return;
    }
    cell.L = rd.matrix(*l, p + "/L");
    cell.M = rd.matrix(*m, p + "/M");
    cell.N = rd.matrix(*nn, p + "/N");
    const Eigen::Index s = cell.N.rows();
    if (cell.N.cols() != s) rd.issue(p + "/N", "N must be square");
    if (cell.L.rows() != n || cell.L.cols() != s) rd.issue(p + "/L", "L must be ports x stubs");
    if (cell.M.rows() != s || cell.M.cols() != n) rd.issue(p + "/M", "M must be stubs x ports");
  } else {
    rd.issue(p + "/kind", "unknown cell kind '" + cell.kind + "'");
  }
}

void parse_signal(Reader& rd, const json& j, const std::string& p, SignalSpec& s) {
  s.type = rd.text(j, "type", p, "", true);
  s.amplitude = rd.number(j, "amplitude", p, 1.0);
  s.delay = rd.integer(j, "delay", p, 0);
  s.omega = rd.number(j, "omega", p, 0.0);
  s.phase = rd.number(j, "phase", p, 0.0);
  s.center = rd.number(j, "center", p, 0.0);
  s.width = rd.number(j, "width", p, 1.0);
  if (s.type != "impulse" && s.type != "step" && s.type != "sine" && s.type != "gaussian" &&
      s.type != "noise") {
    rd.issue(p + "/type", "unknown signal type '" + s.type + "'");
  }
  if (s.type == "gaussian" && !(s.width > 0.0)) rd.issue(p + "/width", "must be positive");
}

PortGroupSpec parse_group(Reader& rd, const json& j, const std::string& p) {
  PortGroupSpec g;
  if (const json* ports = rd.array(j, "ports", p, true)) {
    for (std::size_t i = 0; i < ports->size(); ++i) {
      g.ports.push_back(rd.port_ref((*ports)[i], p + "/ports/" + std::to_string(i)));
    }
  }
  if (const json* w = rd.array(j, "weights", p)) {
    for (std::size_t i = 0; i < w->size(); ++i) {
      if (!(*w)[i].is_number()) {
        rd.issue(p + "/weights/" + std::to_string(i), "expected a number");
      } else {
        g.weights.push_back((*w)[i].get<double>());
      }
    }
    if (g.weights.size() != g.ports.size()) rd.issue(p + "/weights", "one weight per port");
  }
  return g;
}

void parse_run(Reader& rd, const json& j, const std::string& p, RunSpec& r) {
  r.mode = rd.text(j, "mode", p, "time");
  if (r.mode != "time" && r.mode != "freq") rd.issue(p + "/mode", "must be 'time' or 'freq'");
  r.steps = static_cast<int>(rd.integer(j, "steps", p, 100));
  r.record_every = static_cast<int>(rd.integer(j, "record_every", p, 1));
  r.divergence_factor = rd.number(j, "divergence_factor", p, 1e12);
  if (r.steps < 1) rd.issue(p + "/steps", "must be >= 1");
  if (r.record_every < 1) rd.issue(p + "/record_every", "must be >= 1");
  if (const json* probes = rd.array(j, "probes", p)) {
    for (std::size_t i = 0; i < probes->size(); ++i) {
      const std::string pp = p + "/probes/" + std::to_string(i);
      const json& pj = (*probes)[i];
      Probe pr;
      pr.cell = static_cast<int>(rd.integer(pj, "cell", pp, 0, true));
      pr.index = static_cast<int>(rd.integer(pj, "index", pp, 0, true));
      const std::string q = rd.text(pj, "quantity", pp, "out");
      try {
        pr.quantity = parse_probe_quantity(q);
      } catch (const Error&) {
        rd.issue(pp + "/quantity", "unknown probe quantity '" + q + "'");
      }
      r.probes.push_back(pr);
    }
  }
  r.frequency = rd.number(j, "frequency", p, 0.0);
  r.tol = rd.number(j, "tol", p, 1e-8);
  r.max_iter = static_cast<int>(rd.integer(j, "max_iter", p, 20000));
  r.ramp_iters = static_cast<int>(rd.integer(j, "ramp_iters", p, 300));
  if (!(r.tol > 0.0)) rd.issue(p + "/tol", "must be positive");
  if (r.max_iter < 0) rd.issue(p + "/max_iter", "must be >= 0");
  if (r.ramp_iters < 0) rd.issue(p + "/ramp_iters", "must be >= 0");
  if (!(r.frequency >= 0.0)) rd.issue(p + "/frequency", "must be >= 0");
  if (const json* sp = rd.array(j, "sparams", p)) {
    for (std::size_t i = 0; i < sp->size(); ++i) {
      const std::string pp = p + "/sparams/" + std::to_string(i);
      SParamGroupSpec g;
      g.label = rd.text((*sp)[i], "label", pp, "s" + std::to_string(i));
      if (const json* in = rd.member((*sp)[i], "input", pp, true)) g.input = parse_group(rd, *in, pp + "/input");
      if (const json* out = rd.member((*sp)[i], "output", pp, true)) g.output = parse_group(rd, *out, pp + "/output");
      r.sparams.push_back(std::move(g));
    }
  }
  if (const json* fr = rd.array(j, "frequencies", p)) {
    for (std::size_t i = 0; i < fr->size(); ++i) {
      if (!(*fr)[i].is_number() || !((*fr)[i].get<double>() >= 0.0)) {
        rd.issue(p + "/frequencies/" + std::to_string(i), "expected a non-negative number");
      } else {
        r.frequencies.push_back((*fr)[i].get<double>());
      }
    }
  }
  if (const json* im = rd.member(j, "impulse", p, false)) {
    const std::string pp = p + "/impulse";
    r.impulse.cell = static_cast<int>(rd.integer(*im, "cell", pp, 0));
    r.impulse.port = static_cast<int>(rd.integer(*im, "port", pp, 0));
    r.impulse.steps = static_cast<int>(rd.integer(*im, "steps", pp, 100));
    if (r.impulse.steps < 1) rd.issue(pp + "/steps", "must be >= 1");
  }
}

void check_references(Reader& rd, const SimulationConfig& c) {
  const int ncell = static_cast<int>(c.cells.size());
  auto check = [&](const PortRef& r, const std::string& path) {
    if (!valid_ref(c, r)) {
      rd.issue(path, "no port " + std::to_string(r.port) + " on cell " + std::to_string(r.cell));
    }
  };
  for (std::size_t i = 0; i < c.links.size(); ++i) {
    check(c.links[i].a, "/links/" + std::to_string(i) + "/0");
    check(c.links[i].b, "/links/" + std::to_string(i) + "/1");
  }
  for (std::size_t i = 0; i < c.boundaries.size(); ++i) {
    check(c.boundaries[i].port, "/boundaries/" + std::to_string(i));
  }
  for (std::size_t i = 0; i < c.excitations.size(); ++i) {
    check(c.excitations[i].port, "/excitations/" + std::to_string(i));
  }
  for (std::size_t i = 0; i < c.run.probes.size(); ++i) {
    const Probe& pr = c.run.probes[i];
    if (pr.cell < 0 || pr.cell >= ncell || pr.index < 0) {
      rd.issue("/run/probes/" + std::to_string(i), "probe references a missing cell or index");
    }
  }
  for (std::size_t i = 0; i < c.run.sparams.size(); ++i) {
    const auto& g = c.run.sparams[i];
    for (std::size_t k = 0; k < g.input.ports.size(); ++k) {
      check(g.input.ports[k], "/run/sparams/" + std::to_string(i) + "/input/ports/" + std::to_string(k));
    }
    for (std::size_t k = 0; k < g.output.ports.size(); ++k) {
      check(g.output.ports[k], "/run/sparams/" + std::to_string(i) + "/output/ports/" + std::to_string(k));
    }
  }
  if (c.run.impulse.cell < 0 || c.run.impulse.cell >= ncell ||
      !valid_ref(c, {c.run.impulse.cell, c.run.impulse.port})) {
    if (ncell > 0) rd.issue("/run/impulse", "impulse references a missing port");
  }
  if (c.particles) {
    const auto& ps = *c.particles;
    for (std::size_t i = 0; i < ps.initial.size(); ++i) {
      const std::string p = "/particles/initial/" + std::to_string(i);
      const int cell = ps.initial[i].cell;
      if (cell < 0 || cell >= ncell) {
        rd.issue(p + "/cell", "no such cell");
      } else if (c.cells[static_cast<std::size_t>(cell)].kind != "maxwell") {
        rd.issue(p + "/cell", "particles need a maxwell cell");
      }
      if (!(ps.initial[i].v.norm() < ps.params.c0)) rd.issue(p + "/v", "|v| must be below c0");
      if (ps.params.q0 == 0.0 && ps.initial[i].Q != 0.0) {
        rd.issue(p + "/Q", "charge must be zero when q0 = 0");
      }
    }
    for (std::size_t i = 0; i < ps.face_links.size(); ++i) {
      for (const PortRef* r : {&ps.face_links[i].a, &ps.face_links[i].b}) {
        if (r->cell < 0 || r->cell >= ncell || r->port < 0 || r->port >= 6) {
          rd.issue("/particles/face_links/" + std::to_string(i), "face reference outside the mesh");
        }
      }
    }
    for (std::size_t i = 0; i < c.cells.size(); ++i) {
      if (c.cells[i].kind != "maxwell") {
        rd.issue("/cells/" + std::to_string(i), "particle runs need maxwell cells only");
      }
    }
  }
}

void check_units(const SimulationConfig& c) {
  const Normalization& n = c.normalization;
  if (!(n.c0 > 0.0) || !(n.eps0 > 0.0) || !(n.mu0 > 0.0)) {
    fail(ErrorCode::UnitError, "normalization constants must be positive");
  }
  const double implied = 1.0 / std::sqrt(n.eps0 * n.mu0);
  if (std::abs(implied - n.c0) > 1e-6 * n.c0) {
    fail(ErrorCode::UnitError, "normalization is inconsistent: 1/sqrt(eps0 mu0) = " +
                                   std::to_string(implied) + " but c0 = " + std::to_string(n.c0));
  }
  if (c.particles && std::abs(c.particles->params.c0 - n.c0) > 1e-9 * n.c0) {
    fail(ErrorCode::UnitError, "particle c0 differs from the normalization c0");
  }
}

json mat_json(const Mat& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(row);
  }
  return rows;
}

json cplx_json(cplx z) { return json::array({z.real(), z.imag()}); }
json ref_json(const PortRef& r) { return json::array({r.cell, r.port}); }

json group_json(const PortGroupSpec& g) {
  json j;
  j["ports"] = json::array();
  for (const auto& r : g.ports) j["ports"].push_back(ref_json(r));
  if (!g.weights.empty()) j["weights"] = g.weights;
  return j;
}

}  // namespace

SchemaError::SchemaError(std::vector<SchemaIssue> issues)
    : Error(ErrorCode::SchemaViolation, join_issues(issues)), issues_(std::move(issues)) {}

int CellSpec::port_count() const {
  if (kind == "maxwell") return 6;
  return static_cast<int>(K.rows());
}

SimulationConfig parse_config(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw SchemaError(std::vector<SchemaIssue>{{"", std::string("malformed JSON: ") + e.what()}});
  }
  Reader rd;
  SimulationConfig c;
  if (!root.is_object()) throw SchemaError(std::vector<SchemaIssue>{{"", "top level must be an object"}});

  c.schema_version = static_cast<int>(rd.integer(root, "schema_version", "", 0, true));
  if (rd.issues.empty() && c.schema_version != kSchemaVersion) {
    rd.issue("/schema_version", "unsupported schema version " + std::to_string(c.schema_version));
  }
  if (const json* n = rd.member(root, "normalization", "", false)) {
    c.normalization.present = true;
    c.normalization.c0 = rd.number(*n, "c0", "/normalization", 1.0);
    c.normalization.eps0 = rd.number(*n, "eps0", "/normalization", 1.0);
    c.normalization.mu0 = rd.number(*n, "mu0", "/normalization", 1.0);
  }
  c.tau = rd.number(root, "tau", "", 1.0, true);
  if (!(c.tau > 0.0)) rd.issue("/tau", "time step must be positive");

  if (const json* cells = rd.array(root, "cells", "", true)) {
    if (cells->empty()) rd.issue("/cells", "at least one cell is required");
    for (std::size_t i = 0; i < cells->size(); ++i) {
      CellSpec cell;
      parse_cell(rd, (*cells)[i], "/cells/" + std::to_string(i), cell);
      c.cells.push_back(std::move(cell));
    }
  }
  if (const json* links = rd.array(root, "links", "")) {
    for (std::size_t i = 0; i < links->size(); ++i) {
      const std::string p = "/links/" + std::to_string(i);
      const json& l = (*links)[i];
      if (!l.is_array() || l.size() != 2) {
        rd.issue(p, "expected [[cell, port], [cell, port]]");
        continue;
      }
      c.links.push_back({rd.port_ref(l[0], p + "/0"), rd.port_ref(l[1], p + "/1")});
    }
  }
  if (const json* bnd = rd.array(root, "boundaries", "")) {
    for (std::size_t i = 0; i < bnd->size(); ++i) {
      const std::string p = "/boundaries/" + std::to_string(i);
      const json& b = (*bnd)[i];
      BoundarySpec bs;
      if (const json* pr = rd.member(b, "port", p, true)) bs.port = rd.port_ref(*pr, p + "/port");
      if (const json* r = rd.member(b, "reflection", p, false)) {
        bs.reflection = rd.complex_value(*r, p + "/reflection").value_or(0.0);
      }
      c.boundaries.push_back(bs);
    }
  }
  if (const json* u = rd.member(root, "unlinked_reflection", "", false)) {
    c.unlinked_reflection = rd.complex_value(*u, "/unlinked_reflection");
  }
  if (const json* exc = rd.array(root, "excitations", "")) {
    for (std::size_t i = 0; i < exc->size(); ++i) {
      const std::string p = "/excitations/" + std::to_string(i);
      const json& e = (*exc)[i];
      ExcitationSpec es;
      if (const json* pr = rd.member(e, "port", p, true)) es.port = rd.port_ref(*pr, p + "/port");
      if (const json* s = rd.member(e, "signal", p, false)) {
        SignalSpec sig;
        parse_signal(rd, *s, p + "/signal", sig);
        es.signal = sig;
      }
      if (const json* ph = rd.member(e, "phasor", p, false)) {
        es.phasor = rd.complex_value(*ph, p + "/phasor");
      }
      if (!es.signal && !es.phasor) rd.issue(p, "needs a signal or a phasor");
      c.excitations.push_back(es);
    }
  }
  if (const json* pj = rd.member(root, "particles", "", false)) {
    ParticleSpec ps;
    const std::string p = "/particles";
    ps.params.m0 = rd.number(*pj, "m0", p, 1.0, true);
    ps.params.q0 = rd.number(*pj, "q0", p, 1.0, true);
    ps.params.nu_c = rd.number(*pj, "nu_c", p, 0.0);
    ps.params.c0 = rd.number(*pj, "c0", p, c.normalization.c0);
    if (!(ps.params.m0 > 0.0)) rd.issue(p + "/m0", "must be positive");
    if (!(ps.params.c0 > 0.0)) rd.issue(p + "/c0", "must be positive");
    if (!(ps.params.nu_c >= 0.0)) rd.issue(p + "/nu_c", "must be >= 0");
    if (const json* init = rd.array(*pj, "initial", p)) {
      for (std::size_t i = 0; i < init->size(); ++i) {
        const std::string pp = p + "/initial/" + std::to_string(i);
        ParticleInit pi;
        pi.cell = static_cast<int>(rd.integer((*init)[i], "cell", pp, 0, true));
        pi.Q = rd.number((*init)[i], "Q", pp, 0.0);
        pi.v = rd.vector3((*init)[i], "v", pp);
        ps.initial.push_back(pi);
      }
    }
    if (const json* fl = rd.array(*pj, "face_links", p)) {
      for (std::size_t i = 0; i < fl->size(); ++i) {
        const std::string pp = p + "/face_links/" + std::to_string(i);
        const json& l = (*fl)[i];
        if (!l.is_array() || l.size() != 2) {
          rd.issue(pp, "expected [[cell, face], [cell, face]]");
          continue;
        }
        ps.face_links.push_back({rd.port_ref(l[0], pp + "/0"), rd.port_ref(l[1], pp + "/1")});
      }
    }
    c.particles = ps;
  }
  if (const json* run = rd.member(root, "run", "", false)) parse_run(rd, *run, "/run", c.run);
  if (const json* out = rd.member(root, "output", "", false)) {
    c.output_dir = rd.text(*out, "dir", "/output", "out");
  }

  if (rd.issues.empty()) check_references(rd, c);
  if (!rd.issues.empty()) throw SchemaError(std::move(rd.issues));
  check_units(c);
  return c;
}

SimulationConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::IoError, "cannot read config file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string serialize_config(const SimulationConfig& c) {
  json j;
  j["schema_version"] = c.schema_version;
  if (c.normalization.present) {
    j["normalization"] = {{"c0", c.normalization.c0},
                          {"eps0", c.normalization.eps0},
                          {"mu0", c.normalization.mu0}};
  }
  j["tau"] = c.tau;
  j["cells"] = json::array();
  for (const CellSpec& cell : c.cells) {
    json cj;
    cj["kind"] = cell.kind;
    if (cell.kind == "maxwell") {
      cj["B"] = mat_json(cell.B.transpose());
      cj["eps_r"] = mat_json(cell.eps_r);
      cj["mu_r"] = mat_json(cell.mu_r);
      cj["kappa_e"] = mat_json(cell.kappa_e);
      cj["kappa_m"] = mat_json(cell.kappa_m);
      cj["y_e"] = cell.y_e;
      cj["y_m"] = cell.y_m;
    } else {
      cj["K"] = mat_json(cell.K);
      if (cell.N.rows() > 0) {
        cj["L"] = mat_json(cell.L);
        cj["M"] = mat_json(cell.M);
        cj["N"] = mat_json(cell.N);
      }
    }
    j["cells"].push_back(cj);
  }
  j["links"] = json::array();
  for (const auto& l : c.links) j["links"].push_back(json::array({ref_json(l.a), ref_json(l.b)}));
  j["boundaries"] = json::array();
  for (const auto& b : c.boundaries) {
    j["boundaries"].push_back({{"port", ref_json(b.port)}, {"reflection", cplx_json(b.reflection)}});
  }
  if (c.unlinked_reflection) j["unlinked_reflection"] = cplx_json(*c.unlinked_reflection);
  j["excitations"] = json::array();
  for (const auto& e : c.excitations) {
    json ej;
    ej["port"] = ref_json(e.port);
    if (e.signal) {
      const SignalSpec& s = *e.signal;
      ej["signal"] = {{"type", s.type},     {"amplitude", s.amplitude}, {"delay", s.delay},
                      {"omega", s.omega},   {"phase", s.phase},         {"center", s.center},
                      {"width", s.width}};
    }
    if (e.phasor) ej["phasor"] = cplx_json(*e.phasor);
    j["excitations"].push_back(ej);
  }
  if (c.particles) {
    const ParticleSpec& ps = *c.particles;
    json pj;
    pj["m0"] = ps.params.m0;
    pj["q0"] = ps.params.q0;
    pj["nu_c"] = ps.params.nu_c;
    pj["c0"] = ps.params.c0;
    pj["initial"] = json::array();
    for (const auto& pi : ps.initial) {
      pj["initial"].push_back(
          {{"cell", pi.cell}, {"Q", pi.Q}, {"v", json::array({pi.v(0), pi.v(1), pi.v(2)})}});
    }
    pj["face_links"] = json::array();
    for (const auto& l : ps.face_links) {
      pj["face_links"].push_back(json::array({ref_json(l.a), ref_json(l.b)}));
    }
    j["particles"] = pj;
  }
  const RunSpec& r = c.run;
  json rj;
  rj["mode"] = r.mode;
  rj["steps"] = r.steps;
  rj["record_every"] = r.record_every;
  rj["divergence_factor"] = r.divergence_factor;
  rj["probes"] = json::array();
  for (const Probe& p : r.probes) {
    rj["probes"].push_back(
        {{"cell", p.cell}, {"quantity", std::string(to_string(p.quantity))}, {"index", p.index}});
  }
  rj["frequency"] = r.frequency;
  rj["tol"] = r.tol;
  rj["max_iter"] = r.max_iter;
  rj["ramp_iters"] = r.ramp_iters;
  rj["sparams"] = json::array();
  for (const auto& g : r.sparams) {
    rj["sparams"].push_back(
        {{"label", g.label}, {"input", group_json(g.input)}, {"output", group_json(g.output)}});
  }
  rj["frequencies"] = r.frequencies;
  rj["impulse"] = {{"cell", r.impulse.cell}, {"port", r.impulse.port}, {"steps", r.impulse.steps}};
  j["run"] = rj;
  j["output"] = {{"dir", c.output_dir}};
  return j.dump(2);
}

Mesh build_mesh(const SimulationConfig& config) {
  std::vector<int> ports;
  for (const CellSpec& cell : config.cells) ports.push_back(cell.port_count());
  Mesh mesh(ports, config.tau);
  for (const auto& l : config.links) mesh.link(global_port(mesh, l.a), global_port(mesh, l.b));
  for (const auto& b : config.boundaries) mesh.set_boundary(global_port(mesh, b.port), b.reflection);
  if (config.unlinked_reflection) {
    for (int p = 0; p < mesh.port_count(); ++p) {
      if (mesh.partner(p) < 0 && mesh.boundaries().count(p) == 0) {
        mesh.set_boundary(p, *config.unlinked_reflection);
      }
    }
  }
  return mesh;
}

int global_port(const Mesh& mesh, const PortRef& ref) { return mesh.global_index(ref.cell, ref.port); }

Materials cell_materials(const SimulationConfig& config, const CellSpec& cell) {
  Materials m;
  m.eps = config.normalization.eps0 * cell.eps_r;
  m.mu = config.normalization.mu0 * cell.mu_r;
  m.kappa_e = cell.kappa_e;
  m.kappa_m = cell.kappa_m;
  return m;
}

CanonicalCell build_canonical_cell(const SimulationConfig& config, const CellSpec& cell) {
  if (cell.kind != "maxwell") fail(ErrorCode::InvalidArgument, "not a maxwell cell");
  HexGeometry g;
  g.B = cell.B;
  return make_canonical_cell(g, cell_materials(config, cell), config.tau, cell.y_e, cell.y_m);
}

std::vector<SBlocks> build_cell_blocks(const SimulationConfig& config) {
  std::vector<SBlocks> out;
  for (const CellSpec& cell : config.cells) {
    if (cell.kind == "maxwell") {
      out.push_back(build_cell_smatrix(build_canonical_cell(config, cell)));
    } else {
      SBlocks b{cell.K, cell.L, cell.M, cell.N, config.tau};
      b.validate();
      out.push_back(std::move(b));
    }
  }
  return out;
}

std::vector<DeflectedSystem> build_cell_systems(const SimulationConfig& config) {
  std::vector<DeflectedSystem> out;
  for (const CellSpec& cell : config.cells) {
    if (cell.kind == "maxwell") {
      const CanonicalCell cc = build_canonical_cell(config, cell);
      out.emplace_back(build_cell_smatrix(cc), cell_link_basis(cc), cell_model_form(cc),
                       Perturbation::none(12));
    } else {
      SBlocks b{cell.K, cell.L, cell.M, cell.N, config.tau};
      b.validate();
      const int n = static_cast<int>(b.n_in());
      // Trivial law F = b (the outgoing part of the link vector); no deflection.
      ModelForm model;
      model.image_dim = n;
      Mat phi0 = Mat::Zero(n, 2 * n);
      phi0.rightCols(n) = Mat::Identity(n, n);
      model.phi[0] = phi0;
      out.emplace_back(std::move(b), LinkBasis::coordinate(n, n), std::move(model),
                       Perturbation::none(n));
    }
  }
  return out;
}

Excitation build_excitation(const SimulationConfig& config, const Mesh& mesh, std::uint64_t seed,
                            int steps) {
  Excitation exc;
  std::mt19937_64 rng(seed);
  const double tau = config.tau;
  for (const ExcitationSpec& e : config.excitations) {
    const int port = global_port(mesh, e.port);
    if (e.phasor) exc.phasors[port] += *e.phasor;
    if (!e.signal) continue;
    const SignalSpec s = *e.signal;
    DriveSignal f;
    if (s.type == "impulse") {
      f = [s](long k) { return k == s.delay ? s.amplitude : 0.0; };
    } else if (s.type == "step") {
      f = [s](long k) { return k >= s.delay ? s.amplitude : 0.0; };
    } else if (s.type == "sine") {
      f = [s, tau](long k) { return s.amplitude * std::sin(s.omega * tau * static_cast<double>(k) + s.phase); };
    } else if (s.type == "gaussian") {
      f = [s](long k) {
        const double x = (static_cast<double>(k) - s.center) / s.width;
        return s.amplitude * std::exp(-0.5 * x * x);
      };
    } else {
      std::normal_distribution<double> normal(0.0, 1.0);
      auto table = std::make_shared<std::vector<double>>();
      table->reserve(static_cast<std::size_t>(std::max(steps, 0)));
      for (int k = 0; k < steps; ++k) table->push_back(s.amplitude * normal(rng));
      f = [table](long k) {
        return k >= 0 && k < static_cast<long>(table->size()) ? (*table)[static_cast<std::size_t>(k)] : 0.0;
      };
    }
    if (exc.signals.count(port)) {
      DriveSignal prev = exc.signals[port];
      exc.signals[port] = [prev, f](long k) { return prev(k) + f(k); };
    } else {
      exc.signals[port] = f;
    }
  }
  return exc;
}

std::vector<SParamSpec> build_sparam_specs(const SimulationConfig& config, const Mesh& mesh) {
  std::vector<SParamSpec> out;
  for (const auto& g : config.run.sparams) {
    SParamSpec s;
    s.label = g.label;
    for (const auto& r : g.input.ports) s.input.ports.push_back(global_port(mesh, r));
    s.input.weights = g.input.weights;
    for (const auto& r : g.output.ports) s.output.ports.push_back(global_port(mesh, r));
    s.output.weights = g.output.weights;
    out.push_back(std::move(s));
  }
  return out;
}

PlasmaMesh build_plasma_mesh(const SimulationConfig& config) {
  if (!config.particles) fail(ErrorCode::InvalidArgument, "configuration has no particles");
  const ParticleSpec& ps = *config.particles;
  const int ncell = static_cast<int>(config.cells.size());
  Mesh field = build_mesh(config);
  Mesh faces(std::vector<int>(static_cast<std::size_t>(ncell), 6), config.tau);
  for (const auto& l : ps.face_links) {
    faces.link(faces.global_index(l.a.cell, l.a.port), faces.global_index(l.b.cell, l.b.port));
  }
  for (int p = 0; p < faces.port_count(); ++p) {
    if (faces.partner(p) < 0) faces.set_boundary(p, 0.0);
  }
  std::vector<ParticleState> init(static_cast<std::size_t>(ncell));
  for (const auto& pi : ps.initial) {
    init[static_cast<std::size_t>(pi.cell)].Q = pi.Q;
    init[static_cast<std::size_t>(pi.cell)].v = pi.v;
  }
  std::vector<PlasmaCell> cells;
  cells.reserve(static_cast<std::size_t>(ncell));
  for (int c = 0; c < ncell; ++c) {
    cells.push_back(make_plasma_cell(build_canonical_cell(config, config.cells[static_cast<std::size_t>(c)]),
                                     ps.params, init[static_cast<std::size_t>(c)]));
  }
  return PlasmaMesh{std::move(field), std::move(faces), std::move(cells), ps.params};
}

double angular_frequency(double hz) { return 2.0 * std::numbers::pi * hz; }

}  // namespace tlm
