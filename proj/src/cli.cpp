#include "detbound/cli.hpp"

#include "detbound/multicopy.hpp"
#include "detbound/parallel.hpp"
#include "detbound/sdp.hpp"
#include "detbound/sld.hpp"

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#ifndef DETBOUND_VERSION
#define DETBOUND_VERSION "0.0.0"
#endif

namespace detbound {

using json = nlohmann::json;

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw SpecError("cannot open '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json parse_json(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    std::size_t line = 1, col = 1;
    for (std::size_t i = 0; i < std::min<std::size_t>(e.byte ? e.byte - 1 : 0, text.size()); ++i) {
      if (text[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    throw SpecError("parse error at line " + std::to_string(line) + ", column " + std::to_string(col) + ": " +
                    e.what());
  }
}

double number_field(const json& j, const std::string& field) {
  if (!j.is_number()) throw SpecError("field '" + field + "': expected a number");
  return j.get<double>();
}

void check_keys(const json& j, const std::vector<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) throw SpecError(where + ": expected an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (std::find(allowed.begin(), allowed.end(), it.key()) == allowed.end()) {
      throw SpecError(where + ": unknown field '" + it.key() + "'");
    }
  }
}

ModelSpec model_spec_from_json(const json& j, const std::string& where) {
  check_keys(j, {"name", "fixed", "theta", "label"}, where);
  ModelSpec s;
  if (!j.contains("name") || !j["name"].is_string()) throw SpecError("field '" + where + ".name': expected a string");
  s.name = j["name"].get<std::string>();
  if (j.contains("fixed")) {
    const json& f = j["fixed"];
    if (!f.is_object()) throw SpecError("field '" + where + ".fixed': expected an object");
    for (auto it = f.begin(); it != f.end(); ++it) {
      s.fixed[it.key()] = number_field(it.value(), where + ".fixed." + it.key());
    }
  }
  if (j.contains("theta")) {
    const json& t = j["theta"];
    if (t.is_number()) {
      s.theta.push_back(t.get<double>());
    } else if (t.is_array()) {
      for (std::size_t i = 0; i < t.size(); ++i) {
        s.theta.push_back(number_field(t[i], where + ".theta[" + std::to_string(i) + "]"));
      }
    } else {
      throw SpecError("field '" + where + ".theta': expected a number or an array of numbers");
    }
  }
  if (j.contains("label")) {
    if (!j["label"].is_string()) throw SpecError("field '" + where + ".label': expected a string");
    s.label = j["label"].get<std::string>();
  }
  return s;
}

RVec to_rvec(const std::vector<double>& v) {
  RVec r(Eigen::Index(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) r(Eigen::Index(i)) = v[i];
  return r;
}

RVec resolve_theta(const ModelSpec& spec, const DetectorModel& model, const std::optional<RVec>& theta) {
  RVec t;
  if (theta) {
    t = *theta;
  } else if (!spec.theta.empty()) {
    t = to_rvec(spec.theta);
  } else {
    throw SpecError("field 'theta': missing (give it in the spec or via --theta)");
  }
  if (t.size() != model.params) {
    throw SpecError("field 'theta': model '" + model.name + "' has " + std::to_string(model.params) +
                    " parameter(s), got " + std::to_string(t.size()));
  }
  if (!model.in_domain(t)) throw SpecError("field 'theta': point lies outside the model domain");
  return t;
}

std::string spec_label(const ModelSpec& s) { return s.label.empty() ? s.name : s.label; }

json num(double x) {
  if (!std::isfinite(x)) return json(nullptr);
  return json(round9(x));
}

std::string csv_bool(bool b) { return b ? "true" : "false"; }

std::string probe_string(const Vec& psi) {
  std::ostringstream os;
  for (Eigen::Index i = 0; i < psi.size(); ++i) {
    if (i) os << ' ';
    os << fmt9(psi(i).real() + 0.0) << (psi(i).imag() < 0 ? "" : "+") << fmt9(psi(i).imag() + 0.0) << 'i';
  }
  return os.str();
}

json report_json(const BoundReport& r, int dim) {
  json j;
  j["model"] = r.model;
  j["param"] = r.param;
  std::vector<double> th(r.theta.data(), r.theta.data() + r.theta.size());
  json jt = json::array();
  for (double t : th) jt.push_back(num(t));
  j["theta"] = jt;
  j["cfi_max"] = num(r.cfi_max);
  j["j_trace"] = num(r.j_trace);
  j["j_spectral"] = num(r.j_spectral);
  j["j_ext"] = num(r.j_ext);
  j["attainable"] = r.attainable;
  j["real_traces"] = r.real_traces;
  j["common_eigvec"] = r.common_eigvec;
  j["top_q"] = r.top_q;
  j["diagonal"] = r.diagonal;
  j["ordering_ok"] = r.ordering_ok;
  j["cfi_converged"] = r.cfi_converged;
  if (dim == 2) {
    j["probe_polar"] = num(r.probe_polar);
    j["probe_azimuth"] = num(r.probe_azimuth);
  }
  json pv = json::array();
  for (Eigen::Index i = 0; i < r.probe.size(); ++i) pv.push_back({num(r.probe(i).real()), num(r.probe(i).imag())});
  j["probe"] = pv;
  return j;
}

json multiparam_json(const MultiParamReport& m) {
  return json{{"qcrb_trace", num(m.qcrb_trace)},   {"qcrb_spectral", num(m.qcrb_spectral)},
              {"gill_massar", num(m.gill_massar)}, {"ccrb_star", num(m.ccrb_star)},
              {"sequential", num(m.sequential)},   {"total_qfi", num(m.total_qfi)}};
}

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

}  // namespace

OutputFormat parse_format(const std::string& s) {
  if (s == "csv") return OutputFormat::csv;
  if (s == "json") return OutputFormat::json;
  throw SpecError("unknown format '" + s + "' (expected csv or json)");
}

ModelSpec parse_model_spec(const std::string& text) { return model_spec_from_json(parse_json(text), "model"); }

ModelSpec load_model_spec(const std::string& path) {
  try {
    return parse_model_spec(read_file(path));
  } catch (const SpecError& e) {
    throw SpecError(path + ": " + e.what());
  }
}

DetectorModel build_model(const ModelSpec& spec) {
  if (spec.name == "random") {
    auto get = [&](const char* key, double def) {
      auto it = spec.fixed.find(key);
      return it == spec.fixed.end() ? def : it->second;
    };
    for (const auto& kv : spec.fixed) {
      if (kv.first != "d" && kv.first != "m" && kv.first != "seed") {
        throw SpecError("field 'fixed." + kv.first + "': not used by model 'random'");
      }
    }
    double d = get("d", 2), m = get("m", 2), seed = get("seed", 1);
    if (d != std::floor(d) || m != std::floor(m) || seed != std::floor(seed) || seed < 0) {
      throw SpecError("fields 'fixed.d', 'fixed.m', 'fixed.seed' must be non-negative integers");
    }
    return random_model(int(d), int(m), std::uint64_t(seed));
  }
  try {
    return build_named_model(spec.name, spec.fixed);
  } catch (const ModelError& e) {
    throw SpecError(std::string("field 'name'/'fixed': ") + e.what());
  }
}

ExperimentConfig parse_experiment(const std::string& text) {
  json j = parse_json(text);
  check_keys(j, {"model", "theta_true", "probes", "shots", "resamples", "seed"}, "experiment");
  if (!j.contains("model")) throw SpecError("field 'model': missing");
  ModelSpec ms = model_spec_from_json(j["model"], "model");
  ExperimentConfig cfg;
  cfg.model = build_model(ms);
  if (cfg.model.params != 1) throw SpecError("field 'model': simulation needs a single-parameter model");
  if (j.contains("theta_true")) {
    cfg.theta_true = number_field(j["theta_true"], "theta_true");
  } else if (ms.theta.size() == 1) {
    cfg.theta_true = ms.theta[0];
  } else {
    throw SpecError("field 'theta_true': missing");
  }
  RVec t(1);
  t << cfg.theta_true;
  if (!cfg.model.in_domain(t)) throw SpecError("field 'theta_true': outside the model domain");
  if (!j.contains("probes")) throw SpecError("field 'probes': missing");
  const json& p = j["probes"];
  if (p.is_object()) {
    check_keys(p, {"from", "to", "count", "phi"}, "probes");
    for (const char* k : {"from", "to", "count"})
      if (!p.contains(k)) throw SpecError(std::string("field 'probes.") + k + "': missing");
    double count = number_field(p["count"], "probes.count");
    if (count < 0 || count != std::floor(count)) throw SpecError("field 'probes.count': expected a count");
    double phi = p.contains("phi") ? number_field(p["phi"], "probes.phi") : 0.0;
    cfg.probes = probe_grid(number_field(p["from"], "probes.from"), number_field(p["to"], "probes.to"), int(count),
                            phi);
  } else if (p.is_array()) {
    for (std::size_t i = 0; i < p.size(); ++i) {
      const std::string f = "probes[" + std::to_string(i) + "]";
      if (p[i].is_number()) {
        cfg.probes.push_back({p[i].get<double>(), 0.0});
      } else if (p[i].is_array() && p[i].size() == 2) {
        cfg.probes.push_back({number_field(p[i][0], f), number_field(p[i][1], f)});
      } else {
        throw SpecError("field '" + f + "': expected a polar angle or [polar, azimuth]");
      }
    }
  } else {
    throw SpecError("field 'probes': expected an object or an array");
  }
  if (j.contains("shots")) {
    double n = number_field(j["shots"], "shots");
    if (n < 1 || n != std::floor(n)) throw SpecError("field 'shots': expected an integer >= 1");
    cfg.shots = (long long)n;
  }
  if (j.contains("resamples")) {
    double r = number_field(j["resamples"], "resamples");
    if (r < 1 || r != std::floor(r)) throw SpecError("field 'resamples': expected an integer >= 1");
    cfg.resamples = int(r);
  }
  if (j.contains("seed")) {
    if (!j["seed"].is_number_unsigned()) throw SpecError("field 'seed': expected a non-negative integer");
    cfg.seed = j["seed"].get<std::uint64_t>();
  }
  return cfg;
}

ExperimentConfig load_experiment(const std::string& path) {
  try {
    return parse_experiment(read_file(path));
  } catch (const SpecError& e) {
    throw SpecError(path + ": " + e.what());
  }
}

std::vector<double> parse_csv_numbers(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    tok.erase(0, tok.find_first_not_of(" \t"));
    tok.erase(tok.find_last_not_of(" \t") + 1);
    if (tok.empty()) continue;
    std::size_t used = 0;
    double v = 0;
    try {
      v = std::stod(tok, &used);
    } catch (const std::exception&) {
      throw SpecError("not a number: '" + tok + "'");
    }
    if (used != tok.size()) throw SpecError("not a number: '" + tok + "'");
    out.push_back(v);
  }
  return out;
}

std::vector<RVec> parse_grid(const std::string& grid, int params) {
  std::vector<std::vector<double>> axes;
  std::stringstream ss(grid);
  std::string axis;
  while (std::getline(ss, axis, ';')) {
    if (axis.find_first_not_of(" \t") == std::string::npos) continue;
    std::vector<std::string> parts;
    std::stringstream as(axis);
    std::string part;
    while (std::getline(as, part, ':')) parts.push_back(part);
    if (parts.size() != 3) throw SpecError("grid axis '" + axis + "': expected start:stop:count");
    auto nums = parse_csv_numbers(parts[0] + "," + parts[1] + "," + parts[2]);
    if (nums.size() != 3 || nums[2] < 0 || nums[2] != std::floor(nums[2])) {
      throw SpecError("grid axis '" + axis + "': expected start:stop:count");
    }
    std::vector<double> pts;
    int count = int(nums[2]);
    for (int i = 0; i < count; ++i) pts.push_back(count == 1 ? nums[0] : nums[0] + (nums[1] - nums[0]) * i / (count - 1));
    axes.push_back(pts);
  }
  if (axes.empty()) return {};
  if (int(axes.size()) != params) {
    throw SpecError("grid has " + std::to_string(axes.size()) + " axes, model has " + std::to_string(params) +
                    " parameter(s)");
  }
  std::vector<RVec> out;
  std::size_t total = 1;
  for (const auto& a : axes) total *= a.size();
  for (std::size_t idx = 0; idx < total; ++idx) {
    RVec t(params);
    std::size_t rem = idx;
    for (int k = params - 1; k >= 0; --k) {
      const auto& a = axes[std::size_t(k)];
      t(k) = a[rem % a.size()];
      rem /= a.size();
    }
    out.push_back(t);
  }
  return out;
}

namespace {

// Unit norm, rounding-level entries zeroed, first nonzero entry real and positive.
Vec canonical_probe(Vec psi) {
  psi /= psi.norm();
  for (Eigen::Index i = 0; i < psi.size(); ++i) {
    if (std::abs(psi(i).real()) < 1e-12) psi(i).real(0);
    if (std::abs(psi(i).imag()) < 1e-12) psi(i).imag(0);
  }
  for (Eigen::Index i = 0; i < psi.size(); ++i) {
    if (std::abs(psi(i)) > 0) {
      psi *= std::conj(psi(i)) / std::abs(psi(i));
      psi(i) = std::abs(psi(i));
      break;
    }
  }
  return psi / psi.norm();
}

}  // namespace

std::pair<double, double> bloch_angles(const Vec& psi) {
  if (psi.size() != 2) throw DimensionError("bloch_angles: qubit state expected");
  Mat rho = psi * psi.adjoint() / psi.squaredNorm();
  double x = 2 * rho(0, 1).real(), y = -2 * rho(0, 1).imag(), z = (rho(0, 0) - rho(1, 1)).real();
  double polar = std::atan2(std::hypot(x, y), z);
  double azimuth = std::hypot(x, y) > 1e-12 ? std::atan2(y, x) : 0.0;
  if (azimuth < 0) azimuth += 2 * M_PI;
  // Angles within optimiser noise of the 0 = 2 pi seam print as 0.
  if (azimuth < 1e-7 || 2 * M_PI - azimuth < 1e-7) azimuth = 0;
  return {polar, azimuth + 0.0};
}

BoundReport compute_bound_report(const DetectorModel& model, const RVec& theta, int k, const CfiMaxOptions& opts) {
  model.require_in_domain(theta);
  const Povm povm = model.povm(theta);
  const DerivativeSet derivs = model.derivatives(theta);
  const std::vector<Mat>& dpi = derivs.at(std::size_t(k));
  std::vector<Mat> slds;
  for (std::size_t j = 0; j < povm.size(); ++j) slds.push_back(sld_eig(povm[j], dpi[j]));

  BoundReport r;
  r.model = model.name;
  r.param = k;
  r.theta = theta;
  r.j_trace = trace_dqfi(slds, povm);
  SpectralDqfi sp = spectral_dqfi(slds, povm);
  r.j_spectral = sp.value;
  AttainabilityReport att = attainability_check(slds, povm, q_operator(slds, povm));
  r.attainable = att.attainable;
  r.real_traces = att.real_traces;
  r.common_eigvec = att.common_eigvec;
  r.top_q = att.top_q;
  r.diagonal = is_diagonal_model(povm, {dpi});
  r.j_ext = extended_dqfi(povm, dpi).value;

  CfiMaxResult best = cfi_max_probe(povm, dpi, opts);
  if (r.attainable && (r.j_spectral - best.value) > 1e-4 * r.j_spectral) {
    CfiMaxOptions more = opts;
    more.restarts *= 2;
    CfiMaxResult again = cfi_max_probe(povm, dpi, more);
    if (again.value > best.value) best = again;
  }
  r.cfi_max = best.value;
  r.cfi_converged = best.converged;
  r.probe = canonical_probe(best.probe);
  if (model.dim == 2) {
    // Prefer the northern hemisphere when the antipodal probe is equally good.
    Vec anti(2);
    anti << -std::conj(best.probe(1)), std::conj(best.probe(0));
    if (bloch_angles(best.probe).first > M_PI / 2) {
      try {
        const double alt = cfi(pure_state(anti), povm, dpi);
        if (std::abs(alt - best.value) <= 1e-9 * std::max(1.0, best.value)) r.probe = canonical_probe(anti);
      } catch (const DivergentInformation&) {
      }
    }
    std::tie(r.probe_polar, r.probe_azimuth) = bloch_angles(r.probe);
  }

  const double slack = 1e-6;
  OrderingReport ord = ordering_check(r.j_trace, r.j_spectral, double(model.dim));
  r.ordering_ok = ord.ok && r.j_ext <= r.j_spectral * (1 + slack) + slack &&
                  r.cfi_max <= r.j_ext * (1 + slack) + slack;
  return r;
}

MultiParamReport compute_multiparam_report(const DetectorModel& model, const RVec& theta) {
  model.require_in_domain(theta);
  const Povm povm = model.povm(theta);
  const DerivativeSet derivs = model.derivatives(theta);
  const SldSet slds = compute_slds(povm, derivs);
  MultiParamReport m;
  RMat jt = dqfi_matrix_trace(slds, povm);
  m.qcrb_trace = trace_qcrb(jt);
  m.gill_massar = gill_massar_qcrb(jt);
  m.qcrb_spectral = spectral_qcrb_sdp(povm, derivs).value;
  const int n = model.params, outcomes = model.outcomes;
  int size = outcomes > 1 ? (n + outcomes - 2) / (outcomes - 1) : n;
  m.ccrb_star = ccrb_star(povm, derivs, std::max(size, n)).value;
  RVec singles(n);
  for (int k = 0; k < n; ++k) singles(k) = spectral_dqfi(slds.param(k), povm).value;
  SequentialBound sb = sequential_bound(singles);
  m.sequential = sb.sequential;
  m.total_qfi = sb.total_qfi;
  return m;
}

std::string RunManifest::line() const {
  std::ostringstream os;
  os << "detbound " << DETBOUND_VERSION << " command=" << command << " models=";
  for (std::size_t i = 0; i < models.size(); ++i) os << (i ? ";" : "") << models[i];
  os << " seed=" << seed << " outputs=";
  if (outputs.empty()) os << "-";
  for (std::size_t i = 0; i < outputs.size(); ++i) os << (i ? ";" : "") << outputs[i];
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", wall_time);
  os << " wall_time_s=" << buf;
  return os.str();
}

std::string failures_json(const std::vector<ItemFailure>& failures) {
  json arr = json::array();
  for (const auto& f : failures) arr.push_back({{"item", f.item}, {"error", f.error}});
  return json{{"failures", arr}}.dump();
}

double round9(double x) {
  if (!std::isfinite(x) || x == 0) return x;
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.9g", x);
  return std::strtod(buf, nullptr);
}

std::string fmt9(double x) {
  if (std::isnan(x)) return "nan";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.9g", x);
  return buf;
}

CommandResult cmd_bounds(const ModelSpec& spec, const std::optional<RVec>& theta_in, const CommandOptions& opts) {
  const auto t0 = Clock::now();
  DetectorModel model = build_model(spec);
  RVec theta = resolve_theta(spec, model, theta_in);
  CommandResult res;
  res.manifest = {"bounds", {spec_label(spec)}, opts.seed, opts.outputs, 0};
  std::vector<BoundReport> reports(std::size_t(model.params));
  std::vector<std::string> errors(std::size_t(model.params));
  CfiMaxOptions copts;
  copts.seed = opts.seed;
  parallel_for(std::size_t(model.params), opts.jobs, [&](std::size_t k) {
    try {
      reports[k] = compute_bound_report(model, theta, int(k), copts);
    } catch (const std::exception& e) {
      errors[k] = e.what();
    }
  });
  std::optional<MultiParamReport> multi;
  if (model.params > 1) {
    try {
      multi = compute_multiparam_report(model, theta);
    } catch (const std::exception& e) {
      res.failures.push_back({"multiparameter", e.what()});
    }
  }
  for (std::size_t k = 0; k < errors.size(); ++k)
    if (!errors[k].empty()) res.failures.push_back({"param " + std::to_string(k), errors[k]});
  res.manifest.wall_time = seconds_since(t0);

  std::ostringstream os;
  if (opts.format == OutputFormat::json) {
    json j;
    j["manifest"] = res.manifest.line();
    json arr = json::array();
    for (std::size_t k = 0; k < reports.size(); ++k)
      if (errors[k].empty()) arr.push_back(report_json(reports[k], model.dim));
    j["reports"] = arr;
    if (multi) j["multiparameter"] = multiparam_json(*multi);
    os << j.dump(2) << "\n";
  } else {
    os << "# " << res.manifest.line() << "\n";
    os << "model,param,theta,cfi_max,j_trace,j_spectral,j_ext,attainable,real_traces,common_eigvec,top_q,diagonal,"
          "ordering_ok,probe_polar,probe_azimuth,probe\n";
    for (std::size_t k = 0; k < reports.size(); ++k) {
      if (!errors[k].empty()) continue;
      const BoundReport& r = reports[k];
      std::string th;
      for (Eigen::Index i = 0; i < r.theta.size(); ++i) th += (i ? " " : "") + fmt9(r.theta(i));
      os << r.model << ',' << r.param << ',' << th << ',' << fmt9(r.cfi_max) << ',' << fmt9(r.j_trace) << ','
         << fmt9(r.j_spectral) << ',' << fmt9(r.j_ext) << ',' << csv_bool(r.attainable) << ','
         << csv_bool(r.real_traces) << ',' << csv_bool(r.common_eigvec) << ',' << csv_bool(r.top_q) << ','
         << csv_bool(r.diagonal) << ',' << csv_bool(r.ordering_ok) << ','
         << (model.dim == 2 ? fmt9(r.probe_polar) : "") << ',' << (model.dim == 2 ? fmt9(r.probe_azimuth) : "")
         << ',' << probe_string(r.probe) << "\n";
    }
    if (multi) {
      os << "# qcrb_trace,qcrb_spectral,gill_massar,ccrb_star,sequential,total_qfi\n";
      os << "# " << fmt9(multi->qcrb_trace) << ',' << fmt9(multi->qcrb_spectral) << ',' << fmt9(multi->gill_massar)
         << ',' << fmt9(multi->ccrb_star) << ',' << fmt9(multi->sequential) << ',' << fmt9(multi->total_qfi) << "\n";
    }
  }
  res.body = os.str();
  return res;
}

CommandResult cmd_sweep(const ModelSpec& spec, const std::string& grid, const CommandOptions& opts) {
  const auto t0 = Clock::now();
  DetectorModel model = build_model(spec);
  const std::vector<RVec> points = parse_grid(grid, model.params);
  for (const auto& p : points) {
    // Points on the physical boundary sit one guard width outside the domain; they are
    // evaluated and flagged. Anything further out is a usage error.
    for (int k = 0; k < model.params; ++k) {
      const auto& dom = model.domain[std::size_t(k)];
      const double slack = 2 * kDomainGuard;
      if (p(k) < dom.first - slack || p(k) > dom.second + slack) {
        throw SpecError("grid point " + fmt9(p(k)) + " outside the domain of parameter " + std::to_string(k));
      }
    }
  }
  CommandResult res;
  res.manifest = {"sweep", {spec_label(spec)}, opts.seed, opts.outputs, 0};
  const int n = model.params;
  struct Row {
    std::string status = "ok";
    std::vector<double> values;
  };
  std::vector<Row> rows(points.size());
  CfiMaxOptions copts;
  copts.seed = opts.seed;
  parallel_for(points.size(), opts.jobs, [&](std::size_t i) {
    Row& row = rows[i];
    try {
      const Povm povm = model.povm(points[i]);
      const DerivativeSet derivs = model.derivatives(points[i]);
      if (n == 1) {
        std::vector<Mat> slds;
        for (std::size_t j = 0; j < povm.size(); ++j) slds.push_back(sld_eig(povm[j], derivs[0][j]));
        double jtr = trace_dqfi(slds, povm), jsp = spectral_dqfi(slds, povm).value;
        double jext = extended_dqfi(povm, derivs[0]).value;
        double cm = cfi_max_probe(povm, derivs[0], copts).value;
        row.values = {jtr, jsp, jext, cm};
      } else {
        const SldSet slds = compute_slds(povm, derivs);
        RMat jt = dqfi_matrix_trace(slds, povm);
        for (int k = 0; k < n; ++k) row.values.push_back(trace_dqfi(slds.param(k), povm));
        for (int k = 0; k < n; ++k) row.values.push_back(spectral_dqfi(slds.param(k), povm).value);
        row.values.push_back(trace_qcrb(jt));
        row.values.push_back(spectral_qcrb_sdp(povm, derivs).value);
        row.values.push_back(gill_massar_qcrb(jt));
        const int m = model.outcomes;
        int size = m > 1 ? (n + m - 2) / (m - 1) : n;
        row.values.push_back(ccrb_star(povm, derivs, std::max(size, n)).value);
      }
    } catch (const DivergentInformation& e) {
      row.status = "divergent";
    } catch (const SldError& e) {
      row.status = "divergent";
    } catch (const std::exception& e) {
      row.status = "error";
    }
  });
  std::vector<std::string> header;
  for (int k = 0; k < n; ++k) header.push_back(n == 1 ? "theta" : "theta_" + std::to_string(k));
  header.push_back("status");
  if (n == 1) {
    for (const char* c : {"j_trace", "j_spectral", "j_ext", "cfi_max"}) header.push_back(c);
  } else {
    for (int k = 0; k < n; ++k) header.push_back("j_trace_" + std::to_string(k));
    for (int k = 0; k < n; ++k) header.push_back("j_spectral_" + std::to_string(k));
    for (const char* c : {"qcrb_trace", "qcrb_spectral", "gill_massar", "ccrb_star"}) header.push_back(c);
  }
  const std::size_t value_cols = header.size() - std::size_t(n) - 1;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].status == "error") {
      std::ostringstream item;
      item << "grid point " << i;
      res.failures.push_back({item.str(), "evaluation failed"});
    }
  }
  res.manifest.wall_time = seconds_since(t0);
  std::ostringstream os;
  if (opts.format == OutputFormat::json) {
    json arr = json::array();
    for (std::size_t i = 0; i < rows.size(); ++i) {
      json r;
      for (int k = 0; k < n; ++k) r[header[std::size_t(k)]] = num(points[i](k));
      r["status"] = rows[i].status;
      for (std::size_t c = 0; c < value_cols; ++c) {
        double v = c < rows[i].values.size() ? rows[i].values[c] : std::numeric_limits<double>::quiet_NaN();
        r[header[std::size_t(n) + 1 + c]] = num(v);
      }
      arr.push_back(r);
    }
    os << json{{"manifest", res.manifest.line()}, {"rows", arr}}.dump(2) << "\n";
  } else {
    os << "# " << res.manifest.line() << "\n";
    for (std::size_t c = 0; c < header.size(); ++c) os << (c ? "," : "") << header[c];
    os << "\n";
    for (std::size_t i = 0; i < rows.size(); ++i) {
      for (int k = 0; k < n; ++k) os << (k ? "," : "") << fmt9(points[i](k));
      os << ',' << rows[i].status;
      for (std::size_t c = 0; c < value_cols; ++c) {
        os << ',' << (c < rows[i].values.size() ? fmt9(rows[i].values[c]) : "nan");
      }
      os << "\n";
    }
  }
  res.body = os.str();
  return res;
}

CommandResult cmd_simulate(const ExperimentConfig& cfg_in, const std::string& label, const CommandOptions& opts) {
  const auto t0 = Clock::now();
  ExperimentConfig cfg = cfg_in;
  cfg.jobs = opts.jobs;
  MseSweep sweep = simulate_sweep(cfg);
  CommandResult res;
  res.manifest = {"simulate", {label.empty() ? cfg.model.name : label}, cfg.seed, opts.outputs, 0};
  for (std::size_t i = 0; i < sweep.rows.size(); ++i) {
    if (!sweep.rows[i].ok) res.failures.push_back({"probe " + std::to_string(i), sweep.rows[i].error});
  }
  res.manifest.wall_time = seconds_since(t0);
  std::ostringstream os;
  if (opts.format == OutputFormat::json) {
    json arr = json::array();
    for (const auto& r : sweep.rows) {
      arr.push_back({{"probe_theta", num(r.probe_theta)},
                     {"probe_phi", num(r.probe_phi)},
                     {"mse_scaled", num(r.mse_scaled)},
                     {"mse_std", num(r.mse_std)},
                     {"ccrb", num(r.ccrb)},
                     {"qcrb_spectral", num(r.qcrb_spectral)},
                     {"bias", num(r.bias)}});
    }
    os << json{{"manifest", res.manifest.line()}, {"rows", arr}}.dump(2) << "\n";
  } else {
    write_sweep_csv(os, sweep, res.manifest.line());
  }
  res.body = os.str();
  return res;
}

CommandResult cmd_bench(int count, int d, int m, bool with_cfi, const CommandOptions& opts) {
  if (count < 1) throw SpecError("bench: count must be at least 1");
  const auto t0 = Clock::now();
  struct Row {
    bool ok = false;
    std::string error;
    double jtr = 0, jsp = 0, jext = 0, cm = std::numeric_limits<double>::quiet_NaN();
  };
  std::vector<Row> rows(static_cast<std::size_t>(count));
  parallel_for(rows.size(), opts.jobs, [&](std::size_t i) {
    Row& row = rows[i];
    try {
      DetectorModel model = random_model(d, m, derive_seed(opts.seed, i));
      RVec t = RVec::Zero(1);
      const Povm povm = model.povm(t);
      const std::vector<Mat> dpi = model.derivatives(t)[0];
      std::vector<Mat> slds;
      for (std::size_t j = 0; j < povm.size(); ++j) slds.push_back(sld_eig(povm[j], dpi[j]));
      row.jtr = trace_dqfi(slds, povm);
      row.jsp = spectral_dqfi(slds, povm).value;
      row.jext = extended_dqfi(povm, dpi).value;
      if (with_cfi) {
        CfiMaxOptions copts;
        copts.seed = derive_seed(opts.seed, i);
        row.cm = cfi_max_probe(povm, dpi, copts).value;
      }
      row.ok = true;
    } catch (const std::exception& e) {
      row.error = e.what();
    }
  });
  CommandResult res;
  res.manifest = {"bench", {"random d=" + std::to_string(d) + " m=" + std::to_string(m)}, opts.seed, opts.outputs, 0};
  std::vector<std::size_t> good;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].ok) {
      good.push_back(i);
    } else {
      res.failures.push_back({"model " + std::to_string(i), rows[i].error});
    }
  }
  std::vector<std::size_t> order = good;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return rows[a].jext < rows[b].jext; });
  std::vector<long> rank(rows.size(), -1);
  for (std::size_t r = 0; r < order.size(); ++r) rank[order[r]] = long(r);

  double gap_sum = 0, gap_max = 0, ratio_max = 0;
  for (std::size_t i : good) {
    double gap = (rows[i].jsp - rows[i].jext) / rows[i].jext;
    gap_sum += gap;
    gap_max = std::max(gap_max, gap);
    ratio_max = std::max(ratio_max, rows[i].jtr / rows[i].jext);
  }
  const double gap_mean = good.empty() ? std::numeric_limits<double>::quiet_NaN() : gap_sum / double(good.size());
  res.manifest.wall_time = seconds_since(t0);

  json summary{{"manifest", res.manifest.line()},
               {"count", count},
               {"succeeded", good.size()},
               {"failed", rows.size() - good.size()},
               {"mean_gap", num(gap_mean)},
               {"max_gap", num(good.empty() ? gap_mean : gap_max)},
               {"max_ratio_trace_ext", num(good.empty() ? gap_mean : ratio_max)}};
  res.summary = summary.dump(2) + "\n";

  std::ostringstream os;
  if (opts.format == OutputFormat::json) {
    json arr = json::array();
    for (std::size_t i : good) {
      arr.push_back({{"index", i},
                     {"j_trace", num(rows[i].jtr)},
                     {"j_spectral", num(rows[i].jsp)},
                     {"j_ext", num(rows[i].jext)},
                     {"cfi_max", num(rows[i].cm)},
                     {"rank_j_ext", rank[i]}});
    }
    os << json{{"manifest", res.manifest.line()}, {"rows", arr}}.dump(2) << "\n";
  } else {
    os << "# " << res.manifest.line() << "\n";
    os << "index,j_trace,j_spectral,j_ext,cfi_max,rank_j_ext\n";
    for (std::size_t i : good) {
      os << i << ',' << fmt9(rows[i].jtr) << ',' << fmt9(rows[i].jsp) << ',' << fmt9(rows[i].jext) << ','
         << (with_cfi ? fmt9(rows[i].cm) : "") << ',' << rank[i] << "\n";
    }
  }
  res.body = os.str();
  return res;
}

CommandResult cmd_multicopy(const ModelSpec& spec, int n_max, const CommandOptions& opts) {
  const auto t0 = Clock::now();
  DetectorModel model = build_model(spec);
  if (model.params != 1) throw SpecError("multicopy: single-parameter model expected");
  if (n_max < 1) throw SpecError("multicopy: copy count must be at least 1");
  double cells = 1;
  for (int i = 0; i < n_max; ++i) cells *= model.dim;
  if (cells > kMaxDim) {
    throw DimensionError("multicopy: " + std::to_string(model.dim) + "^" + std::to_string(n_max) +
                         " exceeds the dimension cap of " + std::to_string(kMaxDim));
  }
  RVec theta = resolve_theta(spec, model, std::nullopt);
  const Povm povm = model.povm(theta);
  const std::vector<Mat> dpi = model.derivatives(theta)[0];
  std::vector<Mat> slds;
  for (std::size_t j = 0; j < povm.size(); ++j) slds.push_back(sld_eig(povm[j], dpi[j]));
  const double j1 = spectral_dqfi(slds, povm).value;
  const double an = a_norm(slds, povm);

  struct Row {
    int n;
    NcopyDqfi dq;
    SandwichReport sw;
  };
  std::vector<Row> rows;
  for (int n = 1; n <= n_max; ++n) {
    NcopyDqfi dq = dqfi_ncopy(q_ncopy(slds, povm, n));
    double dn = std::pow(double(model.dim), n);
    rows.push_back({n, dq, sandwich_check(j1, dq.spectral, n, an, dq.trace, dn)});
  }
  CommandResult res;
  res.manifest = {"multicopy", {spec_label(spec)}, opts.seed, opts.outputs, 0};
  for (const auto& r : rows)
    if (!r.sw.ok) res.failures.push_back({"n=" + std::to_string(r.n), "sandwich or ordering check failed"});
  res.manifest.wall_time = seconds_since(t0);
  std::ostringstream os;
  if (opts.format == OutputFormat::json) {
    json arr = json::array();
    for (const auto& r : rows) {
      arr.push_back({{"n", r.n},
                     {"j_spectral_n", num(r.dq.spectral)},
                     {"j_trace_n", num(r.dq.trace)},
                     {"lower", num(r.n * j1)},
                     {"upper", num(r.n * j1 + r.n * (r.n - 1) * an)},
                     {"sandwich_ok", r.sw.sandwich_ok},
                     {"ordering_ok", r.sw.ordering_ok}});
    }
    os << json{{"manifest", res.manifest.line()}, {"a_norm", num(an)}, {"rows", arr}}.dump(2) << "\n";
  } else {
    os << "# " << res.manifest.line() << "\n";
    os << "n,j_spectral_n,j_trace_n,lower,upper,sandwich_ok,ordering_ok\n";
    for (const auto& r : rows) {
      os << r.n << ',' << fmt9(r.dq.spectral) << ',' << fmt9(r.dq.trace) << ',' << fmt9(r.n * j1) << ','
         << fmt9(r.n * j1 + r.n * (r.n - 1) * an) << ',' << csv_bool(r.sw.sandwich_ok) << ','
         << csv_bool(r.sw.ordering_ok) << "\n";
    }
  }
  res.body = os.str();
  return res;
}

}  // namespace detbound
