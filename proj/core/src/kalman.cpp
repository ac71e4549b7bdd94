#include "tsgen/kalman.hpp"

#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/LU>

#include "tsgen/csv.hpp"

namespace tsgen {

namespace {

void check_meas(const Eigen::VectorXd& y, Eigen::Index expect) {
  if (y.size() != expect) {
    throw std::invalid_argument("measurement dimension mismatch");
  }
}

// Gain = (S^-1 (C P))^T with S = C P C^T + r I. Shared by all filters so
// the equivalence tests compare identical arithmetic.
Eigen::MatrixXd kalman_gain(const Eigen::MatrixXd& cp, const Eigen::MatrixXd& cpc,
                            double r) {
  Eigen::MatrixXd s = cpc;
  s.diagonal().array() += r;
  Eigen::LDLT<Eigen::MatrixXd> ldlt(s);
  if (ldlt.info() != Eigen::Success) {
    throw std::runtime_error("innovation covariance is not factorizable");
  }
  return ldlt.solve(cp).transpose();
}

Eigen::MatrixXd symmetrized(const Eigen::MatrixXd& p) {
  return 0.5 * (p + p.transpose());
}

}  // namespace

CkfState ckf_init(const SystemMatrices& sys, double p0_scale) {
  CkfState st;
  st.xhat = Eigen::VectorXd::Zero(sys.state_dim());
  st.P = p0_scale *
         Eigen::MatrixXd::Identity(sys.state_dim(), sys.state_dim());
  st.gain = Eigen::MatrixXd::Zero(sys.state_dim(), sys.Ccal.rows());
  return st;
}

CkfState ckf_step(const CkfState& state, const Eigen::VectorXd& y,
                  const Eigen::VectorXd& u, const SystemMatrices& sys,
                  double r, CkfUpdateForm form) {
  check_meas(y, sys.Ccal.rows());
  CkfState next;
  const Eigen::VectorXd xpr = sys.Acal * state.xhat + sys.Bcal * u;
  Eigen::MatrixXd ppr = sys.Acal * state.P * sys.Acal.transpose() + sys.Q;
  ppr = symmetrized(ppr);

  const Eigen::MatrixXd cp = sys.Ccal * ppr;
  next.gain = kalman_gain(cp, cp * sys.Ccal.transpose(), r);
  next.P = symmetrized(ppr - next.gain * cp);

  const Eigen::VectorXd innov = y - sys.Ccal * xpr;
  if (form == CkfUpdateForm::AsPrinted) {
    next.xhat = sys.Acal * xpr + next.gain * innov;
  } else {
    next.xhat = xpr + next.gain * innov;
  }
  return next;
}

TkfState tkf_init(const ObservableDecomposition& dec, double obs_cov_scale) {
  TkfState st;
  const int no = dec.obs_dim();
  st.obs_est = Eigen::VectorXd::Zero(no);
  st.mean_est.setZero();
  st.obs_cov = obs_cov_scale * Eigen::MatrixXd::Identity(no, no);
  st.cross_cov = Eigen::MatrixXd::Zero(2, no);
  st.obs_gain = Eigen::MatrixXd::Zero(no, dec.diff_dim());
  st.mean_gain = Eigen::MatrixXd::Zero(2, dec.diff_dim());
  st.obs_cov_prior = st.obs_cov;
  st.cross_cov_prior = st.cross_cov;
  return st;
}

TkfState tkf_init_from_full(const ObservableDecomposition& dec,
                            const Eigen::MatrixXd& P0) {
  TkfState st = tkf_init(dec, 0.0);
  const Eigen::MatrixXd pbr =
      dec.transform * P0 * dec.transform.transpose();
  const int no = dec.obs_dim();
  st.obs_cov = symmetrized(pbr.topLeftCorner(no, no));
  st.cross_cov = pbr.bottomLeftCorner(2, no);
  return st;
}

TkfState tkf_step(const TkfState& state, const Eigen::VectorXd& y,
                  const Eigen::VectorXd& u, const ObservableDecomposition& dec,
                  const Eigen::MatrixXd& Q, double r) {
  check_meas(y, dec.diff_dim());
  const int no = dec.obs_dim();

  // Mean prediction with the block-triangular dynamics.
  const Eigen::VectorXd obs_pr =
      dec.obs_dyn * state.obs_est + dec.obs_input * u;
  const Eigen::Vector2d mean_pr = dec.mean_coupling * state.obs_est +
                                  dec.base_A * state.mean_est +
                                  dec.mean_input * u;

  // Covariance prediction for the two retained blocks only. The noise
  // blocks are To Q To' and Tmean Q To'.
  const Eigen::MatrixXd qto = Q * dec.obs_proj.transpose();
  Eigen::MatrixXd obs_cov_pr =
      dec.obs_dyn * state.obs_cov * dec.obs_dyn.transpose() +
      dec.obs_proj * qto;
  obs_cov_pr = symmetrized(obs_cov_pr);
  const Eigen::MatrixXd cross_cov_pr =
      (dec.mean_coupling * state.obs_cov + dec.base_A * state.cross_cov) *
          dec.obs_dyn.transpose() +
      dec.mean_proj * qto;

  const Eigen::MatrixXd cp = dec.obs_output * obs_cov_pr;
  const Eigen::MatrixXd cpc = cp * dec.obs_output.transpose();

  TkfState next;
  next.obs_gain = kalman_gain(cp, cpc, r);
  // L_mean shares the innovation factorization: P_mo C' (C P_oo C' + rI)^-1.
  {
    Eigen::MatrixXd s = cpc;
    s.diagonal().array() += r;
    next.mean_gain =
        Eigen::LDLT<Eigen::MatrixXd>(s)
            .solve((cross_cov_pr * dec.obs_output.transpose()).transpose())
            .transpose();
  }

  next.obs_cov = symmetrized(obs_cov_pr - next.obs_gain * cp);
  // Posterior cross block in the printed form P_mo <- P_mo (I - C' L_o').
  next.cross_cov = cross_cov_pr * (Eigen::MatrixXd::Identity(no, no) -
                                   dec.obs_output.transpose() *
                                       next.obs_gain.transpose());

  const Eigen::VectorXd innov = y - dec.obs_output * obs_pr;
  next.obs_est = obs_pr + next.obs_gain * innov;
  next.mean_est = mean_pr + next.mean_gain * innov;
  next.obs_cov_prior = obs_cov_pr;
  next.cross_cov_prior = cross_cov_pr;
  return next;
}

double spectral_radius(const Eigen::MatrixXd& m) {
  Eigen::EigenSolver<Eigen::MatrixXd> es(m, /*computeEigenvectors=*/false);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

namespace {

// One prior-form Riccati map application:
// P -> ToQTo' + Aoo (P - P C'(CPC'+rI)^-1 C P) Aoo'.
Eigen::MatrixXd riccati_map(const Eigen::MatrixXd& p,
                            const Eigen::MatrixXd& obs_dyn,
                            const Eigen::MatrixXd& obs_output,
                            const Eigen::MatrixXd& qo, double r) {
  const Eigen::MatrixXd cp = obs_output * p;
  Eigen::MatrixXd s = cp * obs_output.transpose();
  s.diagonal().array() += r;
  const Eigen::MatrixXd gain = Eigen::LDLT<Eigen::MatrixXd>(s)
                                   .solve(cp)
                                   .transpose();  // P C' S^-1
  return qo + obs_dyn * (p - gain * cp) * obs_dyn.transpose();
}

}  // namespace

namespace {

// Fixed-point phase: iterate until the relative per-step change drops
// under tol or the iteration budget runs out. Returns iterations spent.
long long riccati_fixed_point(Eigen::MatrixXd& p, const Eigen::MatrixXd& obs_dyn,
                              const Eigen::MatrixXd& obs_output,
                              const Eigen::MatrixXd& qo, double r, double tol,
                              long long budget) {
  long long it = 0;
  for (; it < budget; ++it) {
    Eigen::MatrixXd pn = riccati_map(p, obs_dyn, obs_output, qo, r);
    pn = 0.5 * (pn + pn.transpose());
    const double change = (pn - p).norm();
    p = pn;
    if (change <= tol * p.norm()) break;
  }
  return it;
}

// Newton phase: with the gain frozen the covariance solves the Stein
// equation P = M P M' + Qo + (A L) r (A L)'; refreshing the gain each
// pass converges quadratically to the stabilizing solution even when
// the closed loop is extremely slow.
void riccati_newton(Eigen::MatrixXd& p, const Eigen::MatrixXd& obs_dyn,
                    const Eigen::MatrixXd& obs_output, const Eigen::MatrixXd& qo,
                    double r, int iterations) {
  const Eigen::Index no = p.rows();
  const Eigen::MatrixXd identity = Eigen::MatrixXd::Identity(no, no);
  for (int j = 0; j < iterations; ++j) {
    const Eigen::MatrixXd cp = obs_output * p;
    Eigen::MatrixXd s = cp * obs_output.transpose();
    s.diagonal().array() += r;
    const Eigen::MatrixXd gain =
        Eigen::LDLT<Eigen::MatrixXd>(s).solve(cp).transpose();
    const Eigen::MatrixXd m = obs_dyn * (identity - gain * obs_output);
    if (spectral_radius(m) >= 1.0) return;  // keep the safe iterate
    const Eigen::MatrixXd ag = obs_dyn * gain;
    const Eigen::MatrixXd rhs = qo + r * ag * ag.transpose();
    // Stein solve by vectorization: (I - M (x) M) vec(X) = vec(rhs).
    const Eigen::Index nn = no * no;
    Eigen::MatrixXd sys = Eigen::MatrixXd::Identity(nn, nn);
    for (Eigen::Index br = 0; br < no; ++br) {
      for (Eigen::Index bc = 0; bc < no; ++bc) {
        sys.block(no * br, no * bc, no, no) -= m(br, bc) * m;
      }
    }
    const Eigen::VectorXd vec = Eigen::Map<const Eigen::VectorXd>(rhs.data(), nn);
    Eigen::VectorXd sol = sys.partialPivLu().solve(vec);
    Eigen::MatrixXd px = Eigen::Map<Eigen::MatrixXd>(sol.data(), no, no);
    px = 0.5 * (px + px.transpose());
    const double change = (px - p).norm() / px.norm();
    p = px;
    if (change < 1e-15) return;
  }
}

}  // namespace

Eigen::MatrixXd solve_riccati(const Eigen::MatrixXd& dyn,
                              const Eigen::MatrixXd& out,
                              const Eigen::MatrixXd& noise_cov, double r,
                              const RiccatiOptions& opts) {
  const Eigen::Index no = dyn.rows();
  Eigen::MatrixXd p = Eigen::MatrixXd::Zero(no, no);
  // When Newton is enabled, a short fixed-point prefix is enough to land
  // in its basin; otherwise run the plain iteration on the full budget.
  const long long prefix = opts.newton_iterations > 0
                               ? std::min<long long>(opts.max_iterations, 20000)
                               : opts.max_iterations;
  long long spent = riccati_fixed_point(p, dyn, out, noise_cov, r,
                                        opts.fixed_point_tol, prefix);
  riccati_newton(p, dyn, out, noise_cov, r, opts.newton_iterations);

  auto residual = [&]() {
    return (riccati_map(p, dyn, out, noise_cov, r) - p).norm() / p.norm();
  };
  if (!(residual() <= 1e-8) && spent < opts.max_iterations) {
    // Newton did not take (e.g. the prefix gain was not yet stabilizing):
    // spend the remaining fixed-point budget, then retry the polish.
    riccati_fixed_point(p, dyn, out, noise_cov, r, opts.fixed_point_tol,
                        opts.max_iterations - spent);
    riccati_newton(p, dyn, out, noise_cov, r, opts.newton_iterations);
  }
  const double resid = residual();
  if (!(resid <= 1e-8)) {
    throw std::runtime_error(
        "solve_riccati did not converge: relative residual " +
        format_double(resid));
  }
  return p;
}

Eigen::MatrixXd solve_riccati(const ObservableDecomposition& dec,
                              const Eigen::MatrixXd& Q, double r,
                              const RiccatiOptions& opts) {
  return solve_riccati(dec.obs_dyn, dec.obs_output,
                       dec.obs_proj * Q * dec.obs_proj.transpose(), r, opts);
}

Eigen::MatrixXd solve_cross_covariance(const ObservableDecomposition& dec,
                                       const Eigen::MatrixXd& Q, double r,
                                       const Eigen::MatrixXd& obs_cov_star,
                                       const Eigen::MatrixXd& obs_gain_star) {
  const int no = dec.obs_dim();
  const Eigen::MatrixXd identity = Eigen::MatrixXd::Identity(no, no);
  const Eigen::MatrixXd closed =
      dec.obs_dyn * (identity - obs_gain_star * dec.obs_output);
  const double rho = spectral_radius(closed);  // rho(M (x) A) = rho(M)
  if (rho >= 1.0) {
    throw std::runtime_error(
        "cross covariance is not unique: closed-loop spectral radius " +
        format_double(rho));
  }
  (void)r;

  const Eigen::MatrixXd rhs =
      dec.mean_proj * Q * dec.obs_proj.transpose() +
      dec.mean_coupling * (identity - obs_gain_star * dec.obs_output) *
          obs_cov_star * dec.obs_dyn.transpose();

  // (I - M (x) A) vec(P) = vec(rhs), unknowns are 2 x no.
  const Eigen::Index nn = 2 * static_cast<Eigen::Index>(no);
  Eigen::MatrixXd sys = Eigen::MatrixXd::Identity(nn, nn);
  for (Eigen::Index br = 0; br < no; ++br) {
    for (Eigen::Index bc = 0; bc < no; ++bc) {
      sys.block(2 * br, 2 * bc, 2, 2) -= closed(br, bc) * dec.base_A;
    }
  }
  Eigen::VectorXd vec = Eigen::Map<const Eigen::VectorXd>(rhs.data(), nn);
  Eigen::VectorXd sol = sys.partialPivLu().solve(vec);
  return Eigen::Map<Eigen::MatrixXd>(sol.data(), 2, no);
}

SteadyGains steady_gains(const ObservableDecomposition& dec,
                         const Eigen::MatrixXd& Q, double r,
                         const RiccatiOptions& opts) {
  SteadyGains g;
  g.obs_cov = solve_riccati(dec, Q, r, opts);
  const Eigen::MatrixXd cp = dec.obs_output * g.obs_cov;
  g.obs_gain = kalman_gain(cp, cp * dec.obs_output.transpose(), r);
  g.cross_cov = solve_cross_covariance(dec, Q, r, g.obs_cov, g.obs_gain);
  {
    Eigen::MatrixXd s = cp * dec.obs_output.transpose();
    s.diagonal().array() += r;
    g.mean_gain =
        Eigen::LDLT<Eigen::MatrixXd>(s)
            .solve((g.cross_cov * dec.obs_output.transpose()).transpose())
            .transpose();
  }
  g.closed_loop_spectral_radius = spectral_radius(
      dec.obs_dyn * (Eigen::MatrixXd::Identity(dec.obs_dim(), dec.obs_dim()) -
                     g.obs_gain * dec.obs_output));
  return g;
}

SstkfState sstkf_step(const SstkfState& state, const Eigen::VectorXd& y,
                      const Eigen::VectorXd& u,
                      const ObservableDecomposition& dec,
                      const SteadyGains& gains) {
  check_meas(y, dec.diff_dim());
  const Eigen::VectorXd obs_pr =
      dec.obs_dyn * state.obs_est + dec.obs_input * u;
  const Eigen::Vector2d mean_pr = dec.mean_coupling * state.obs_est +
                                  dec.base_A * state.mean_est +
                                  dec.mean_input * u;
  const Eigen::VectorXd innov = y - dec.obs_output * obs_pr;
  SstkfState next;
  next.obs_est = obs_pr + gains.obs_gain * innov;
  next.mean_est = mean_pr + gains.mean_gain * innov;
  return next;
}

namespace {

constexpr const char* kGainsMagic = "tsgen_gains";
constexpr int kGainsVersion = 1;

void write_matrix(std::ofstream& out, const char* name,
                  const Eigen::MatrixXd& m) {
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      out << name << ',' << i << ',' << j << ',' << format_double(m(i, j))
          << '\n';
    }
  }
}

}  // namespace

void save_gains(const SteadyGains& gains, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << kGainsMagic << ',' << kGainsVersion << '\n';
  out << "dims," << gains.obs_cov.rows() << ',' << gains.obs_gain.cols()
      << '\n';
  out << "spectral_radius," << format_double(gains.closed_loop_spectral_radius)
      << '\n';
  write_matrix(out, "obs_cov", gains.obs_cov);
  write_matrix(out, "obs_gain", gains.obs_gain);
  write_matrix(out, "cross_cov", gains.cross_cov);
  write_matrix(out, "mean_gain", gains.mean_gain);
}

SteadyGains load_gains(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::string line;
  if (!std::getline(in, line) || line.rfind(kGainsMagic, 0) != 0) {
    throw std::runtime_error("not a tsgen gains file: " + path.string());
  }
  {
    const auto comma = line.find(',');
    if (comma == std::string::npos ||
        std::stoi(line.substr(comma + 1)) != kGainsVersion) {
      throw std::runtime_error("unsupported gains file version");
    }
  }
  if (!std::getline(in, line) || line.rfind("dims,", 0) != 0) {
    throw std::runtime_error("gains file missing dims record");
  }
  int no = 0, nd = 0;
  {
    std::size_t p1 = line.find(',');
    std::size_t p2 = line.find(',', p1 + 1);
    no = std::stoi(line.substr(p1 + 1, p2 - p1 - 1));
    nd = std::stoi(line.substr(p2 + 1));
  }
  SteadyGains g;
  g.obs_cov = Eigen::MatrixXd::Zero(no, no);
  g.obs_gain = Eigen::MatrixXd::Zero(no, nd);
  g.cross_cov = Eigen::MatrixXd::Zero(2, no);
  g.mean_gain = Eigen::MatrixXd::Zero(2, nd);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::size_t p1 = line.find(',');
    const std::string name = line.substr(0, p1);
    if (name == "spectral_radius") {
      g.closed_loop_spectral_radius = std::stod(line.substr(p1 + 1));
      continue;
    }
    std::size_t p2 = line.find(',', p1 + 1);
    std::size_t p3 = line.find(',', p2 + 1);
    const int i = std::stoi(line.substr(p1 + 1, p2 - p1 - 1));
    const int j = std::stoi(line.substr(p2 + 1, p3 - p2 - 1));
    const double v = std::stod(line.substr(p3 + 1));
    if (name == "obs_cov") g.obs_cov(i, j) = v;
    else if (name == "obs_gain") g.obs_gain(i, j) = v;
    else if (name == "cross_cov") g.cross_cov(i, j) = v;
    else if (name == "mean_gain") g.mean_gain(i, j) = v;
    else throw std::runtime_error("unknown record '" + name + "' in gains file");
  }
  return g;
}

}  // namespace tsgen
