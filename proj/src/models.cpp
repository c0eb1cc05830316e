#include "detbound/models.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

namespace detbound {

namespace {

constexpr double kPi = std::numbers::pi;

double fixed_or(const Fixed& fixed, const std::string& key, double fallback) {
  auto it = fixed.find(key);
  return it == fixed.end() ? fallback : it->second;
}

void check_angle(double theta, double phi) {
  if (!(theta >= 0 && theta <= kPi)) {
    throw ModelError("measurement polar angle theta=" + std::to_string(theta) + " outside [0, pi]");
  }
  if (!std::isfinite(phi)) throw ModelError("measurement azimuth phi is not finite");
}

Mat bloch_operator(double x, double y, double z) {
  Mat m(2, 2);
  m << cplx(z, 0), cplx(x, -y), cplx(x, y), cplx(-z, 0);
  return m;
}

// Two-outcome qubit POVM pi_1 = (I + r.sigma)/2, pi_2 = I - pi_1.
Povm qubit_two_outcome(double x, double y, double z) {
  Mat p1 = (identity(2) + bloch_operator(x, y, z)) / 2.0;
  return {p1, identity(2) - p1};
}

std::vector<Mat> qubit_two_outcome_derivative(double dx, double dy, double dz) {
  Mat d1 = bloch_operator(dx, dy, dz) / 2.0;
  return {d1, -d1};
}

DetectorModel single(std::string name, int dim, int outcomes, double lo, double hi) {
  DetectorModel m;
  m.name = std::move(name);
  m.dim = dim;
  m.outcomes = outcomes;
  m.params = 1;
  m.domain = {{lo, hi}};
  return m;
}

Mat diag_of(const RVec& v) { return v.cast<cplx>().asDiagonal(); }

}  // namespace

Povm DetectorModel::povm(const RVec& theta) const {
  if (theta.size() != params) {
    throw ModelError(name + ": expected " + std::to_string(params) + " parameters, got " +
                     std::to_string(theta.size()));
  }
  return evaluator(theta);
}

DerivativeSet DetectorModel::finite_difference(const RVec& theta) const {
  DerivativeSet out(params);
  for (int k = 0; k < params; ++k) {
    double h = 1e-6 * std::max(1.0, std::abs(theta(k)));
    RVec up = theta, dn = theta;
    up(k) += h;
    dn(k) -= h;
    Povm a = povm(up), b = povm(dn);
    out[k].resize(outcomes);
    for (int j = 0; j < outcomes; ++j) out[k][j] = (a[j] - b[j]) / (2 * h);
  }
  return out;
}

DerivativeSet DetectorModel::derivatives(const RVec& theta) const {
  if (theta.size() != params) {
    throw ModelError(name + ": expected " + std::to_string(params) + " parameters, got " +
                     std::to_string(theta.size()));
  }
  if (derivative_evaluator) return derivative_evaluator(theta);
  return finite_difference(theta);
}

bool DetectorModel::in_domain(const RVec& theta) const {
  if (theta.size() != params) return false;
  for (int k = 0; k < params; ++k) {
    if (!(theta(k) >= domain[k].first && theta(k) <= domain[k].second)) return false;
  }
  return true;
}

void DetectorModel::require_in_domain(const RVec& theta) const {
  if (theta.size() != params) {
    throw ModelError(name + ": expected " + std::to_string(params) + " parameters, got " +
                     std::to_string(theta.size()));
  }
  for (int k = 0; k < params; ++k) {
    if (!(theta(k) >= domain[k].first && theta(k) <= domain[k].second)) {
      std::ostringstream os;
      os << name << ": parameter " << k << " = " << theta(k) << " outside [" << domain[k].first
         << ", " << domain[k].second << "]";
      throw ModelError(os.str());
    }
  }
}

void validate_povm(const Povm& povm, double tol) {
  if (povm.empty()) throw ModelError("POVM has no elements");
  const auto d = povm.front().rows();
  Mat sum = Mat::Zero(d, d);
  for (std::size_t j = 0; j < povm.size(); ++j) {
    const Mat& e = povm[j];
    if (e.rows() != d || e.cols() != d) throw ModelError("POVM elements have inconsistent dimensions");
    if (hermiticity_defect(e) > tol) {
      throw ModelError("POVM element " + std::to_string(j) + " is not Hermitian");
    }
    double lo = min_eigenvalue(hermitian_part(e));
    if (lo < -tol) {
      throw ModelError("POVM element " + std::to_string(j) + " has negative eigenvalue " +
                       std::to_string(lo));
    }
    sum += e;
  }
  double defect = max_abs(sum - identity(d));
  if (defect > tol) {
    throw ModelError("POVM completeness violated by " + std::to_string(defect));
  }
}

void validate_derivatives(const DerivativeSet& derivs, double tol) {
  for (std::size_t k = 0; k < derivs.size(); ++k) {
    if (derivs[k].empty()) continue;
    Mat sum = Mat::Zero(derivs[k][0].rows(), derivs[k][0].cols());
    for (const auto& d : derivs[k]) sum += d;
    if (max_abs(sum) > tol) {
      throw ModelError("derivatives for parameter " + std::to_string(k) + " do not sum to zero (" +
                       std::to_string(max_abs(sum)) + ")");
    }
  }
}

Mat probe_from_bloch(double theta, double phi) {
  Vec psi(2);
  psi << std::cos(theta / 2), std::polar(1.0, phi) * std::sin(theta / 2);
  return psi * psi.adjoint();
}

Mat pure_state(const Vec& psi) {
  Vec n = psi / psi.norm();
  return n * n.adjoint();
}

Povm qubit_pvm(double theta, double phi) {
  Vec plus(2), minus(2);
  plus << std::cos(theta / 2), std::polar(1.0, phi) * std::sin(theta / 2);
  minus << std::sin(theta / 2), -std::polar(1.0, phi) * std::cos(theta / 2);
  return {plus * plus.adjoint(), minus * minus.adjoint()};
}

namespace kraus {

std::vector<Mat> dephasing(double p) { return {std::sqrt(1 - p) * identity(2), std::sqrt(p) * pauli::z()}; }

std::vector<Mat> bit_flip(double p) { return {std::sqrt(1 - p) * identity(2), std::sqrt(p) * pauli::x()}; }

std::vector<Mat> bit_phase_flip(double p) {
  return {std::sqrt(1 - p) * identity(2), std::sqrt(p) * pauli::y()};
}

std::vector<Mat> depolarizing(double p) {
  return {std::sqrt(1 - 3 * p / 4) * identity(2), std::sqrt(p / 4) * pauli::x(),
          std::sqrt(p / 4) * pauli::y(), std::sqrt(p / 4) * pauli::z()};
}

std::vector<Mat> amplitude_damping(double p) {
  Mat k1 = Mat::Zero(2, 2), k2 = Mat::Zero(2, 2);
  k1(0, 0) = 1;
  k1(1, 1) = std::sqrt(1 - p);
  k2(0, 1) = std::sqrt(p);
  return {k1, k2};
}

}  // namespace kraus

Povm effective_povm(const std::vector<Mat>& kraus, const Povm& ideal) {
  if (kraus.empty() || ideal.empty()) throw ModelError("effective_povm: empty input");
  const auto d = ideal.front().rows();
  Mat comp = Mat::Zero(d, d);
  for (const auto& k : kraus) {
    if (k.rows() != d || k.cols() != d) throw ModelError("effective_povm: Kraus dimension mismatch");
    comp += k.adjoint() * k;
  }
  double defect = max_abs(comp - identity(d));
  if (defect > 1e-9) {
    throw ModelError("effective_povm: Kraus completeness violated by " + std::to_string(defect));
  }
  Povm out;
  out.reserve(ideal.size());
  for (const auto& pi : ideal) {
    Mat e = Mat::Zero(d, d);
    for (const auto& k : kraus) e += k.adjoint() * pi * k;
    out.push_back(hermitian_part(e));
  }
  return out;
}

DetectorModel build_named_model(const std::string& name, const Fixed& fixed) {
  const double eps = kDomainGuard;

  if (name == "bitflip_z") {
    auto m = single(name, 2, 2, eps, 1 - eps);
    m.evaluator = [](const RVec& t) { return qubit_two_outcome(0, 0, 1 - 2 * t(0)); };
    m.derivative_evaluator = [](const RVec&) {
      return DerivativeSet{qubit_two_outcome_derivative(0, 0, -2)};
    };
    return m;
  }

  if (name == "phaseflip_xz" || name == "bitphaseflip_xz") {
    const double c = std::cos(kPi / 4), s = std::sin(kPi / 4);
    const bool both = name == "bitphaseflip_xz";
    auto m = single(name, 2, 2, eps, both ? 1 - eps : 0.5 - eps);
    m.evaluator = [=](const RVec& t) {
      double f = 1 - 2 * t(0);
      return qubit_two_outcome(f * s, 0, both ? f * c : c);
    };
    m.derivative_evaluator = [=](const RVec&) {
      return DerivativeSet{qubit_two_outcome_derivative(-2 * s, 0, both ? -2 * c : 0)};
    };
    return m;
  }

  if (name == "dephased_pvm" || name == "depolarized_pvm") {
    const double th = fixed_or(fixed, "theta", kPi / 8), ph = fixed_or(fixed, "phi", 0);
    check_angle(th, ph);
    const double nx = std::sin(th) * std::cos(ph), ny = std::sin(th) * std::sin(ph), nz = std::cos(th);
    if (name == "dephased_pvm") {
      auto m = single(name, 2, 2, eps, 0.5 - eps);
      m.evaluator = [=](const RVec& t) {
        double f = 1 - 2 * t(0);
        return qubit_two_outcome(f * nx, f * ny, nz);
      };
      m.derivative_evaluator = [=](const RVec&) {
        return DerivativeSet{qubit_two_outcome_derivative(-2 * nx, -2 * ny, 0)};
      };
      return m;
    }
    auto m = single(name, 2, 2, eps, 1 - eps);
    m.evaluator = [=](const RVec& t) {
      double f = 1 - t(0);
      return qubit_two_outcome(f * nx, f * ny, f * nz);
    };
    m.derivative_evaluator = [=](const RVec&) {
      return DerivativeSet{qubit_two_outcome_derivative(-nx, -ny, -nz)};
    };
    return m;
  }

  if (name == "amplitude_damped_pvm") {
    const double th = fixed_or(fixed, "theta", kPi / 3), ph = fixed_or(fixed, "phi", 0);
    check_angle(th, ph);
    const Povm ideal = qubit_pvm(th, ph);
    auto m = single(name, 2, 2, eps, 1 - eps);
    m.evaluator = [=](const RVec& t) {
      const double p = t(0), r = std::sqrt(1 - p);
      Povm out;
      for (const auto& e : ideal) {
        Mat f(2, 2);
        f << e(0, 0), r * e(0, 1), r * e(1, 0), (1 - p) * e(1, 1) + p * e(0, 0);
        out.push_back(f);
      }
      return out;
    };
    m.derivative_evaluator = [=](const RVec& t) {
      const double p = t(0), dr = -0.5 / std::sqrt(1 - p);
      std::vector<Mat> out;
      for (const auto& e : ideal) {
        Mat f(2, 2);
        f << 0, dr * e(0, 1), dr * e(1, 0), e(0, 0) - e(1, 1);
        out.push_back(f);
      }
      return DerivativeSet{out};
    };
    return m;
  }

  if (name == "onoff_diagonal") {
    const double dv = fixed_or(fixed, "d", 2);
    if (dv != std::floor(dv) || dv < 1 || dv > kMaxDim) {
      throw ModelError("onoff_diagonal: truncation d must be an integer in [1, 64]");
    }
    const int d = int(dv);
    DetectorModel m;
    m.name = name;
    m.dim = d;
    m.outcomes = 2;
    m.params = d;
    m.domain.assign(d, {eps, 1 - eps});
    m.evaluator = [d](const RVec& t) {
      Mat p1 = diag_of(t);
      return Povm{p1, identity(d) - p1};
    };
    m.derivative_evaluator = [d](const RVec&) {
      DerivativeSet out(d);
      for (int k = 0; k < d; ++k) {
        Mat e = Mat::Zero(d, d);
        e(k, k) = 1;
        out[k] = {e, -e};
      }
      return out;
    };
    return m;
  }

  if (name == "bitflip_phaseflip_2param") {
    const double th = fixed_or(fixed, "theta", kPi / 4);
    check_angle(th, 0);
    const double c = std::cos(th), s = std::sin(th);
    DetectorModel m;
    m.name = name;
    m.dim = 2;
    m.outcomes = 2;
    m.params = 2;
    m.domain = {{eps, 0.5 - eps}, {eps, 0.5 - eps}};
    m.evaluator = [=](const RVec& t) {
      return qubit_two_outcome((1 - 2 * t(1)) * s, 0, (1 - 2 * t(0)) * c);
    };
    m.derivative_evaluator = [=](const RVec&) {
      return DerivativeSet{qubit_two_outcome_derivative(0, 0, -2 * c),
                           qubit_two_outcome_derivative(-2 * s, 0, 0)};
    };
    return m;
  }

  if (name == "fouroutcome_nocompat") {
    DetectorModel m;
    m.name = name;
    m.dim = 2;
    m.outcomes = 4;
    m.params = 2;
    m.domain = {{eps, 0.5 - eps}, {eps, 0.5 - eps}};
    m.evaluator = [](const RVec& t) {
      Povm out(4, Mat::Zero(2, 2));
      out[0](0, 0) = t(0);
      out[0](1, 1) = 0.5 - t(0);
      out[1](0, 0) = 0.5 - t(0);
      out[1](1, 1) = t(0);
      out[2] = t(1) * identity(2);
      out[3] = (0.5 - t(1)) * identity(2);
      return out;
    };
    m.derivative_evaluator = [](const RVec&) {
      Mat z = Mat::Zero(2, 2);
      return DerivativeSet{{pauli::z(), -pauli::z(), z, z}, {z, z, identity(2), -identity(2)}};
    };
    return m;
  }

  if (name == "heisenberg_k") {
    const double k = fixed_or(fixed, "k", 2);
    if (!(k > 0) || !std::isfinite(k)) throw ModelError("heisenberg_k: k must be positive");
    auto m = single(name, 2, 2, eps, k * k / (k * k + 1) - eps);
    m.evaluator = [k](const RVec& t) {
      const double p = t(0);
      Mat p1(2, 2);
      p1 << p, p / k, p / k, 1 - p;
      return Povm{p1, identity(2) - p1};
    };
    m.derivative_evaluator = [k](const RVec&) {
      Mat d1(2, 2);
      d1 << 1, 1 / k, 1 / k, -1;
      return DerivativeSet{{d1, -d1}};
    };
    return m;
  }

  throw ModelError("unknown model name '" + name + "'");
}

std::vector<std::string> named_models() {
  return {"bitflip_z",      "phaseflip_xz",         "bitphaseflip_xz",          "dephased_pvm",
          "depolarized_pvm", "amplitude_damped_pvm", "onoff_diagonal",           "bitflip_phaseflip_2param",
          "fouroutcome_nocompat", "heisenberg_k"};
}

DetectorModel tensor_power_model(const DetectorModel& base, int n) {
  if (n < 1) throw ModelError("tensor_power_model: n must be at least 1");
  if (base.params != 1) throw ModelError("tensor_power_model: base model must have one parameter");
  if (n == 1) return base;
  double dn = std::pow(double(base.dim), n);
  if (dn > kMaxDim) {
    throw DimensionError("tensor_power_model: dimension " + std::to_string(long(dn)) + " exceeds 64");
  }
  DetectorModel m = base;
  m.name = base.name + "^" + std::to_string(n);
  m.dim = int(dn);
  m.outcomes = int(std::lround(std::pow(double(base.outcomes), n)));
  const int mo = base.outcomes;
  const int outcomes = m.outcomes;

  auto index_digits = [mo, n](int idx) {
    std::vector<int> digits(n);
    for (int i = n - 1; i >= 0; --i) {
      digits[i] = idx % mo;
      idx /= mo;
    }
    return digits;
  };

  m.evaluator = [base, n, outcomes, index_digits](const RVec& t) {
    Povm b = base.povm(t), out;
    out.reserve(outcomes);
    for (int idx = 0; idx < outcomes; ++idx) {
      auto dg = index_digits(idx);
      Mat e = b[dg[0]];
      for (int i = 1; i < n; ++i) e = kron(e, b[dg[i]]);
      out.push_back(e);
    }
    return out;
  };
  m.derivative_evaluator = [base, n, outcomes, index_digits](const RVec& t) {
    Povm b = base.povm(t);
    std::vector<Mat> db = base.derivatives(t)[0], out;
    out.reserve(outcomes);
    for (int idx = 0; idx < outcomes; ++idx) {
      auto dg = index_digits(idx);
      Mat total;
      for (int pos = 0; pos < n; ++pos) {
        Mat e = pos == 0 ? db[dg[0]] : b[dg[0]];
        for (int i = 1; i < n; ++i) e = kron(e, i == pos ? db[dg[i]] : b[dg[i]]);
        total = pos == 0 ? e : (total + e).eval();
      }
      out.push_back(total);
    }
    return DerivativeSet{out};
  };
  return m;
}

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) {
  // splitmix64 finaliser over the pair
  std::uint64_t z = master + 0x9e3779b97f4a7c15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

DetectorModel random_model(int d, int m, std::uint64_t seed) {
  if (d < 2 || m < 2) throw ModelError("random_model: need d >= 2 and m >= 2");
  if (d > kMaxDim) throw DimensionError("random_model: dimension exceeds 64");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const double h = std::sqrt(0.5);

  std::vector<Mat> pis(m);
  Mat total = Mat::Zero(d, d);
  for (int j = 0; j < m; ++j) {
    Mat a(d, d);
    for (int c = 0; c < d; ++c)
      for (int r = 0; r < d; ++r) a(r, c) = cplx(normal(rng), normal(rng)) * h;
    pis[j] = a.adjoint() * a;
    total += pis[j];
  }
  auto e = hermitian_eig(total);
  RVec w = e.values.cwiseSqrt().cwiseInverse();
  Mat s_inv_half = from_eig<double>(w, e.vectors);
  for (auto& p : pis) p = hermitian_part(s_inv_half * p * s_inv_half);
  // Absorb the rounding residue of the completeness relation.
  Mat residue = identity(d);
  for (const auto& p : pis) residue -= p;
  for (auto& p : pis) p += residue / double(m);

  std::vector<Mat> bs(m);
  Mat bsum = Mat::Zero(d, d);
  for (int j = 0; j < m; ++j) {
    Mat b(d, d);
    for (int r = 0; r < d; ++r) {
      b(r, r) = normal(rng);
      for (int c = r + 1; c < d; ++c) {
        b(r, c) = cplx(normal(rng), normal(rng)) * h;
        b(c, r) = std::conj(b(r, c));
      }
    }
    bs[j] = b;
    bsum += b;
  }
  std::vector<Mat> dpis(m);
  for (int j = 0; j < m; ++j) dpis[j] = bs[j] - bsum / double(m);

  double slack = std::numeric_limits<double>::infinity(), spread = 0;
  for (int j = 0; j < m; ++j) {
    slack = std::min(slack, min_eigenvalue(pis[j]));
    spread = std::max(spread, hermitian_eig(dpis[j]).values.cwiseAbs().maxCoeff());
  }
  const double scale = spread > 0 ? slack / spread : 1.0;
  for (auto& dp : dpis) dp *= scale;

  DetectorModel model = single("random_d" + std::to_string(d) + "_m" + std::to_string(m) + "_s" +
                                   std::to_string(seed),
                               d, m, -0.5, 0.5);
  model.evaluator = [pis, dpis](const RVec& t) {
    Povm out(pis.size());
    for (std::size_t j = 0; j < pis.size(); ++j) out[j] = pis[j] + t(0) * dpis[j];
    return out;
  };
  model.derivative_evaluator = [dpis](const RVec&) { return DerivativeSet{dpis}; };
  return model;
}

}  // namespace detbound
