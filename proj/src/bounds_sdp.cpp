#include "detbound/sdp.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <random>

namespace detbound {

ExtendedDqfi extended_dqfi(const Povm& povm, const std::vector<Mat>& dpi, const SdpOptions& opts) {
  const int m = int(povm.size());
  const int d = int(povm.front().rows());
  const int n = (m + 1) * d;
  if (int(dpi.size()) != m) throw DimensionError("extended_dqfi: derivative count mismatch");
  const auto basis = skew_hermitian_basis(d);
  const int nb = int(basis.size());

  // Rescale the derivatives so the optimum is of order one; the zero offset is feasible.
  const double scale = extended_objective(povm, dpi, std::vector<Mat>(std::size_t(m), Mat::Zero(d, d)));
  const double c = scale > 0 ? 1 / std::sqrt(scale) : 1.0;

  Mat f0 = Mat::Zero(n, n);
  for (int j = 0; j < m; ++j) {
    Mat pi = povm[j];
    if (min_eigenvalue(pi) < 1e-8) pi += 1e-10 * identity(d);
    const int o = (j + 1) * d;
    f0.block(0, o, d, d) = c * dpi[j];
    f0.block(o, 0, d, d) = c * dpi[j];
    f0.block(o, o, d, d) = pi;
  }
  std::vector<Mat> fs;
  Mat ft = Mat::Zero(n, n);
  ft.topLeftCorner(d, d) = identity(d);
  fs.push_back(ft);
  for (int j = 0; j < m; ++j) {
    const int o = (j + 1) * d;
    for (const auto& e : basis) {
      Mat f = Mat::Zero(n, n);
      f.block(0, o, d, d) = -e;
      f.block(o, 0, d, d) = e;
      fs.push_back(f);
    }
  }

  SdpProblem prob;
  prob.c = RVec::Zero(1 + m * nb);
  prob.c(0) = 1;
  prob.blocks.push_back(embed_hermitian_block(f0, fs));
  ExtendedDqfi out;
  out.solution = solve_sdp(prob, opts);
  if (!usable(out.solution)) {
    char detail[160];
    std::snprintf(detail, sizeof detail, " after %d iterations (gap %.3g, primal %.3g, dual %.3g)",
                  out.solution.iterations, out.solution.duality_gap, out.solution.primal_infeasibility,
                  out.solution.dual_infeasibility);
    throw SdpError("extended_dqfi: solver finished with status " + to_string(out.solution.status) + detail);
  }
  for (int j = 0; j < m; ++j) {
    Mat s = Mat::Zero(d, d);
    for (int r = 0; r < nb; ++r) s += out.solution.x(1 + j * nb + r) * basis[r];
    out.skew.push_back(s / c);
  }
  // Report the exact objective at the returned offsets, never below the optimum, and
  // keep the SLD offsets pi L - dpi when they do better.
  out.value = extended_objective(povm, dpi, out.skew);
  try {
    std::vector<Mat> ansatz;
    for (int j = 0; j < m; ++j) ansatz.push_back(povm[j] * sld_eig(povm[j], dpi[j]) - dpi[j]);
    const double v = extended_objective(povm, dpi, ansatz);
    if (v < out.value) {
      out.value = v;
      out.skew = ansatz;
    }
  } catch (const SldError&) {
  }
  return out;
}

double extended_objective(const Povm& povm, const std::vector<Mat>& dpi, const std::vector<Mat>& skew) {
  const auto d = povm.front().rows();
  Mat total = Mat::Zero(d, d);
  for (std::size_t j = 0; j < povm.size(); ++j) {
    total += (dpi[j] - skew[j]) * psd_pinv(povm[j], kSpectralCutoff) * (dpi[j] + skew[j]);
  }
  return max_eigenvalue(hermitian_part(total));
}

std::vector<std::vector<Mat>> qtilde_operators(const SldSet& slds, const Povm& povm) {
  const int n = slds.params();
  const auto d = povm.front().rows();
  std::vector<std::vector<Mat>> out(n, std::vector<Mat>(n));
  for (int a = 0; a < n; ++a) {
    for (int b = a; b < n; ++b) {
      Mat s = Mat::Zero(d, d);
      for (std::size_t l = 0; l < povm.size(); ++l) {
        const Mat& la = slds.param(a)[l];
        const Mat& lb = slds.param(b)[l];
        s += 0.5 * (la * povm[l] * lb + lb * povm[l] * la);
      }
      out[a][b] = out[b][a] = hermitian_part(s);
    }
  }
  return out;
}

SpectralQcrb spectral_qcrb_sdp(const Povm& povm, const DerivativeSet& derivs, const RMat& Win,
                               const SdpOptions& opts) {
  const int n = int(derivs.size());
  const int d = int(povm.front().rows());
  RMat W = Win.size() ? Win : RMat::Identity(n, n);
  if (W.rows() != n || W.cols() != n) throw DimensionError("spectral_qcrb_sdp: weight size mismatch");
  SldSet slds = compute_slds(povm, derivs);
  auto qt = qtilde_operators(slds, povm);
  auto qt_of = [&](const Mat& rho) {
    RMat r(n, n);
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b) r(a, b) = (qt[a][b] * rho).trace().real();
    return r;
  };

  const auto basis = traceless_hermitian_basis(d);
  std::vector<std::pair<int, int>> vidx;
  for (int a = 0; a < n; ++a)
    for (int b = a; b < n; ++b) vidx.emplace_back(a, b);
  const int nv = int(vidx.size()), nr = int(basis.size());

  SdpProblem prob;
  prob.c = RVec::Zero(nv + nr);
  for (int i = 0; i < nv; ++i) {
    auto [a, b] = vidx[i];
    prob.c(i) = a == b ? W(a, a) : W(a, b) + W(b, a);
  }

  Mat mixed = identity(d) / double(d);
  SdpBlock lmi;
  lmi.F0 = RMat::Zero(2 * n, 2 * n);
  lmi.F0.topRightCorner(n, n) = RMat::Identity(n, n);
  lmi.F0.bottomLeftCorner(n, n) = RMat::Identity(n, n);
  lmi.F0.bottomRightCorner(n, n) = qt_of(mixed);
  SdpBlock state;
  state.F0 = real_embed(mixed);
  for (int i = 0; i < nv; ++i) {
    auto [a, b] = vidx[i];
    RMat f = RMat::Zero(2 * n, 2 * n);
    f(a, b) = f(b, a) = 1;
    lmi.F.push_back(f);
    state.F.push_back(RMat::Zero(2 * d, 2 * d));
  }
  for (int r = 0; r < nr; ++r) {
    RMat f = RMat::Zero(2 * n, 2 * n);
    f.bottomRightCorner(n, n) = qt_of(basis[r]);
    lmi.F.push_back(f);
    state.F.push_back(real_embed(basis[r]));
  }
  prob.blocks = {lmi, state};

  SpectralQcrb out;
  out.solution = solve_sdp(prob, opts);
  if (!usable(out.solution)) {
    throw SdpError("spectral_qcrb_sdp: solver finished with status " + to_string(out.solution.status));
  }
  out.value = out.solution.objective;
  out.rho = mixed;
  for (int r = 0; r < nr; ++r) out.rho += out.solution.x(nv + r) * basis[r];
  out.v = RMat::Zero(n, n);
  for (int i = 0; i < nv; ++i) {
    auto [a, b] = vidx[i];
    out.v(a, b) = out.v(b, a) = out.solution.x(i);
  }
  return out;
}

// ---------------------------------------------------------------------------
// CCRB* heuristic

double weighted_ccrb(const std::vector<RMat>& fisher, const RVec& q, const RMat& W) {
  RMat f = RMat::Zero(W.rows(), W.cols());
  for (std::size_t i = 0; i < fisher.size(); ++i) f += q(Eigen::Index(i)) * fisher[i];
  Eigen::SelfAdjointEigenSolver<RMat> es(f);
  if (es.eigenvalues().minCoeff() <= 1e-12 * std::max(1.0, es.eigenvalues().maxCoeff())) {
    return std::numeric_limits<double>::infinity();
  }
  RMat inv = es.eigenvectors() * es.eigenvalues().cwiseInverse().asDiagonal() * es.eigenvectors().transpose();
  return (W * inv).trace();
}

namespace {

RVec project_simplex(const RVec& v) {
  RVec u = v;
  std::sort(u.data(), u.data() + u.size(), std::greater<double>());
  double css = 0, theta = 0;
  for (Eigen::Index i = 0; i < u.size(); ++i) {
    css += u(i);
    double t = (css - 1) / double(i + 1);
    if (u(i) - t > 0) theta = t;
  }
  return (v.array() - theta).max(0.0);
}

RVec ccrb_weight_gradient(const std::vector<RMat>& fisher, const RVec& q, const RMat& W) {
  RMat f = RMat::Zero(W.rows(), W.cols());
  for (std::size_t i = 0; i < fisher.size(); ++i) f += q(Eigen::Index(i)) * fisher[i];
  RMat inv = f.ldlt().solve(RMat::Identity(f.rows(), f.cols()));
  RMat g = inv * W * inv;
  RVec out(q.size());
  for (std::size_t i = 0; i < fisher.size(); ++i) out(Eigen::Index(i)) = -g.cwiseProduct(fisher[i]).sum();
  return out;
}

}  // namespace

RVec optimise_weights(const std::vector<RMat>& fisher, const RMat& W, RVec q, double tol) {
  const auto p = Eigen::Index(fisher.size());
  if (q.size() != p) q = RVec::Constant(p, 1.0 / double(p));
  double f = weighted_ccrb(fisher, q, W);
  if (!std::isfinite(f)) {
    q = RVec::Constant(p, 1.0 / double(p));
    f = weighted_ccrb(fisher, q, W);
    if (!std::isfinite(f)) return q;
  }
  double step = 1.0 / std::max(1.0, f);
  for (int it = 0; it < 2000; ++it) {
    RVec g = ccrb_weight_gradient(fisher, q, W);
    bool moved = false;
    step *= 4;
    while (step > 1e-18) {
      RVec cand = project_simplex(q - step * g);
      double fc = weighted_ccrb(fisher, cand, W);
      if (fc < f - 1e-4 * g.dot(q - cand)) {
        double change = f - fc;
        q = cand;
        f = fc;
        moved = true;
        if (change <= tol * std::max(1.0, f)) return q;
        break;
      }
      step /= 2;
    }
    if (!moved) break;
  }
  return q;
}

namespace {

// Gradient of sum_j dp_j^T G dp_j / p_j with respect to conj(psi), times two.
Vec weighted_cfi_gradient(const Povm& povm, const DerivativeSet& derivs, const RMat& G, const Vec& psi,
                          double& value) {
  const auto n = Eigen::Index(derivs.size());
  Vec grad = Vec::Zero(psi.size());
  value = 0;
  RVec dp(n);
  std::vector<Vec> dv(n);
  for (std::size_t j = 0; j < povm.size(); ++j) {
    Vec pv = povm[j] * psi;
    double p = psi.dot(pv).real();
    for (Eigen::Index k = 0; k < n; ++k) {
      dv[k] = derivs[k][j] * psi;
      dp(k) = psi.dot(dv[k]).real();
    }
    if (p <= kZeroProbability) continue;
    RVec gdp = G * dp;
    double quad = dp.dot(gdp);
    value += quad / p;
    for (Eigen::Index k = 0; k < n; ++k) grad += (4.0 * gdp(k) / p) * dv[k];
    grad -= (2.0 * quad / (p * p)) * pv;
  }
  return grad;
}

RMat pure_cfi_matrix(const Povm& povm, const DerivativeSet& derivs, const Vec& psi) {
  try {
    return cfi_matrix(pure_state(psi), povm, derivs);
  } catch (const DivergentInformation&) {
    return RMat::Constant(Eigen::Index(derivs.size()), Eigen::Index(derivs.size()),
                          std::numeric_limits<double>::quiet_NaN());
  }
}

Vec random_state(int d, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Vec v(d);
  for (int i = 0; i < d; ++i) v(i) = cplx(n(rng), n(rng));
  return v / v.norm();
}

struct EnsembleState {
  std::vector<Vec> states;
  std::vector<RMat> fisher;
  RVec q;
  double value = std::numeric_limits<double>::infinity();
};

void refine(EnsembleState& e, const Povm& povm, const DerivativeSet& derivs, const RMat& W, int outer_iter) {
  const int p = int(e.states.size());
  e.fisher.resize(p);
  for (int i = 0; i < p; ++i) e.fisher[i] = pure_cfi_matrix(povm, derivs, e.states[i]);
  e.q = optimise_weights(e.fisher, W, e.q);
  e.value = weighted_ccrb(e.fisher, e.q, W);
  std::vector<double> steps(p, 0.5);
  for (int it = 0; it < outer_iter; ++it) {
    const double before = e.value;
    for (int i = 0; i < p; ++i) {
      if (!std::isfinite(e.value)) break;
      RMat f = RMat::Zero(W.rows(), W.cols());
      for (int k = 0; k < p; ++k) f += e.q(k) * e.fisher[k];
      RMat inv = f.ldlt().solve(RMat::Identity(f.rows(), f.cols()));
      RMat G = inv * W * inv;
      double val = 0;
      Vec g = weighted_cfi_gradient(povm, derivs, G, e.states[i], val);
      g -= e.states[i] * e.states[i].dot(g);
      const double gn = g.norm();
      if (gn < 1e-14) continue;
      double step = std::min(steps[i] * 2, 1.0 / gn);
      while (step * gn > 1e-12) {
        Vec cand = e.states[i] + step * g;
        cand /= cand.norm();
        RMat fc = pure_cfi_matrix(povm, derivs, cand);
        if (fc.allFinite()) {
          auto fisher = e.fisher;
          fisher[i] = fc;
          double v = weighted_ccrb(fisher, e.q, W);
          if (v < e.value) {
            e.states[i] = cand;
            e.fisher[i] = fc;
            e.value = v;
            break;
          }
        }
        step /= 2;
      }
      steps[i] = step;
    }
    e.q = optimise_weights(e.fisher, W, e.q);
    e.value = weighted_ccrb(e.fisher, e.q, W);
    if (std::isfinite(before) && before - e.value <= 1e-12 * std::max(1.0, e.value)) break;
  }
}

// Basis probes that each inform exactly one distinct parameter.
bool separable_basis_form(const Povm& povm, const DerivativeSet& derivs, const RMat& W, CcrbStar& out) {
  const int n = int(derivs.size());
  const int d = int(povm.front().rows());
  if (!is_diagonal_model(povm, derivs)) return false;
  std::vector<int> owner(n, -1);
  std::vector<double> info(n, 0);
  for (int i = 0; i < d; ++i) {
    Vec e = Vec::Zero(d);
    e(i) = 1;
    RMat f = pure_cfi_matrix(povm, derivs, e);
    if (!f.allFinite()) return false;
    int nz = -1;
    for (int k = 0; k < n; ++k) {
      for (int l = 0; l < n; ++l) {
        if (std::abs(f(k, l)) <= 1e-14) continue;
        if (k != l) return false;
        if (nz >= 0) return false;
        nz = k;
      }
    }
    if (nz < 0) continue;
    if (owner[nz] >= 0) return false;
    owner[nz] = i;
    info[nz] = f(nz, nz);
  }
  for (int k = 0; k < n; ++k)
    if (owner[k] < 0) return false;
  for (int k = 0; k < n; ++k)
    for (int l = 0; l < n; ++l)
      if (k != l && W(k, l) != 0) return false;
  double total = 0;
  std::vector<double> r(n);
  for (int k = 0; k < n; ++k) {
    r[k] = std::sqrt(W(k, k) / info[k]);
    total += r[k];
  }
  out.value = total * total;
  out.closed_form = true;
  for (int k = 0; k < n; ++k) {
    Vec e = Vec::Zero(d);
    e(owner[k]) = 1;
    out.ensemble.emplace_back(r[k] / total, pure_state(e));
  }
  return true;
}

}  // namespace

CcrbStar ccrb_star(const Povm& povm, const DerivativeSet& derivs, int ensemble_size, const RMat& Win,
                   const CcrbStarOptions& opts) {
  const int n = int(derivs.size());
  const int m = int(povm.size());
  const int d = int(povm.front().rows());
  RMat W = Win.size() ? Win : RMat::Identity(n, n);
  const int needed = (n + m - 2) / std::max(1, m - 1);
  if (ensemble_size < needed) {
    throw Error("ccrb_star: ensemble of " + std::to_string(ensemble_size) + " probes cannot identify " +
                std::to_string(n) + " parameters with " + std::to_string(m) + " outcomes");
  }
  CcrbStar out;
  if (n == 1) {
    auto best = cfi_max_probe(povm, derivs[0]);
    out.value = W(0, 0) / best.value;
    out.ensemble = {{1.0, pure_state(best.probe)}};
    return out;
  }
  if (opts.allow_closed_form && separable_basis_form(povm, derivs, W, out)) return out;

  std::vector<Vec> seeds;
  for (int k = 0; k < n; ++k) seeds.push_back(cfi_max_probe(povm, derivs[k]).probe);
  for (int i = 0; i < d; ++i) {
    Vec e = Vec::Zero(d);
    e(i) = 1;
    seeds.push_back(e);
  }
  std::mt19937_64 rng(opts.seed);
  EnsembleState best;
  for (int r = 0; r < opts.restarts; ++r) {
    EnsembleState e;
    for (int i = 0; i < ensemble_size; ++i) {
      if (r == 0 && i < int(seeds.size())) {
        e.states.push_back(seeds[i]);
      } else if (r == 1 && i < int(seeds.size()) - n) {
        e.states.push_back(seeds[n + i]);
      } else {
        e.states.push_back(random_state(d, rng));
      }
    }
    e.q = RVec::Constant(ensemble_size, 1.0 / ensemble_size);
    refine(e, povm, derivs, W, opts.outer_iter);
    if (e.value < best.value) best = e;
  }
  if (!std::isfinite(best.value)) {
    throw Error("ccrb_star: Fisher matrix singular for every ensemble tried");
  }
  out.value = best.value;
  for (int i = 0; i < ensemble_size; ++i) {
    if (best.q(i) > 0) out.ensemble.emplace_back(best.q(i), pure_state(best.states[i]));
  }
  return out;
}

}  // namespace detbound
