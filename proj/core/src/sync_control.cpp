#include "tsgen/sync_control.hpp"

#include <cmath>
#include <stdexcept>

namespace tsgen {

ControllerConfig feedback_gains(double gamma, double tau, bool allow_unstable) {
  if (!(tau > 0.0) || !std::isfinite(tau)) {
    throw std::invalid_argument("tau must be positive");
  }
  if (!std::isfinite(gamma)) {
    throw std::invalid_argument("gamma must be finite");
  }
  ControllerConfig cfg;
  cfg.gamma = gamma;
  cfg.tau = tau;
  cfg.F << gamma / tau, 1.0;
  cfg.D = tau / 2.0;
  cfg.stable = std::abs(1.0 - gamma) < 1.0;
  if (!cfg.stable && !allow_unstable) {
    throw std::invalid_argument(
        "synchronization requires |1 - gamma| < 1; pass the unstable "
        "override to build this controller anyway");
  }
  return cfg;
}

Eigen::VectorXd control_input(const Eigen::VectorXd& obs_est,
                              const ControllerConfig& cfg,
                              const ObservableDecomposition& dec) {
  const int d = dec.diff_dim();
  const int m = dec.n_hm;
  if (obs_est.size() != dec.obs_dim()) {
    throw std::invalid_argument("observable estimate has wrong dimension");
  }
  // phi = -(F(0) xi_p + F(1) xi_f + D * VJ * nu)
  Eigen::VectorXd phi = -(cfg.F(0) * obs_est.head(d) +
                          cfg.F(1) * obs_est.segment(d, d));
  if (m > 0) {
    phi -= cfg.D * dec.drift_diff * obs_est.tail(m);
  }
  return dec.v_right_inv * phi;
}

ClosedLoopTrace closed_loop_simulate(const EnsembleSpec& spec,
                                     const ObservableDecomposition& dec,
                                     const SteadyGains& gains,
                                     const ControllerConfig& cfg,
                                     const ClosedLoopOptions& opts) {
  if (opts.horizon < 1) throw std::invalid_argument("horizon must be >= 1");
  const SystemMatrices sys = assemble_system(spec);
  const int n = spec.size();
  const int m = spec.hm_count();
  const int d = n - 1;
  const int h = opts.horizon;

  ClosedLoopTrace out;
  out.sim.seed = opts.seed;
  out.sim.x = Eigen::MatrixXd::Zero(h + 1, 2 * n);
  out.sim.z = Eigen::MatrixXd::Zero(h + 1, m);
  out.sim.y = Eigen::MatrixXd::Zero(h + 1, d);
  out.sim.u = Eigen::MatrixXd::Zero(h, n);
  out.obs_est = Eigen::MatrixXd::Zero(h + 1, dec.obs_dim());
  out.mean_est = Eigen::MatrixXd::Zero(h + 1, 2);
  out.theta = Eigen::VectorXd::Zero(h + 1);
  out.sync_error = Eigen::MatrixXd::Zero(h + 1, n);
  out.corrected = Eigen::MatrixXd::Zero(h + 1, n);
  out.phase_est = Eigen::MatrixXd::Zero(h + 1, n);
  if (opts.record_noise) {
    out.sim.vx = Eigen::MatrixXd::Zero(h, 2 * n);
    out.sim.vz = Eigen::MatrixXd::Zero(h, m);
    out.sim.w = Eigen::MatrixXd::Zero(h + 1, d);
  }

  EnsembleNoise noise(spec, opts.seed);
  Eigen::VectorXd state = Eigen::VectorXd::Zero(sys.state_dim());
  if (opts.initial_state) {
    if (opts.initial_state->size() != sys.state_dim()) {
      throw std::invalid_argument("initial state has wrong dimension");
    }
    state = *opts.initial_state;
    out.sim.x.row(0) = state.head(2 * n).transpose();
    out.sim.z.row(0) = state.tail(m).transpose();
  }
  SstkfState sst;
  sst.obs_est = Eigen::VectorXd::Zero(dec.obs_dim());
  sst.mean_est.setZero();
  TkfState tkf = tkf_init(dec, 1e-18);
  if (opts.exact_initial_estimates) {
    const Eigen::VectorXd eta = dec.transform * state;
    sst.obs_est = eta.head(dec.obs_dim());
    sst.mean_est = eta.tail(2);
    tkf.obs_est = sst.obs_est;
    tkf.mean_est = sst.mean_est;
  }

  // Reference destination, used when reintegrating instead of projecting
  // the true states.
  Eigen::Vector2d eta_ref = Eigen::Vector2d::Zero();
  if (opts.reference == ReferenceMode::Reintegrated) {
    eta_ref = dec.mean_proj * state;
  }
  out.obs_est.row(0) = sst.obs_est.transpose();
  out.mean_est.row(0) = sst.mean_est.transpose();

  Eigen::VectorXd w0 = noise.measurement();
  out.sim.y.row(0) = (sys.Ccal * state + w0).transpose();
  if (opts.record_noise) out.sim.w->row(0) = w0.transpose();

  Eigen::VectorXd vx, vz;
  for (int k = 0; k <= h; ++k) {
    const Eigen::VectorXd& obs_est =
        opts.use_time_varying_filter ? tkf.obs_est : sst.obs_est;

    // Record step-k derived quantities.
    const Eigen::VectorXd p = state.head(n);
    const double theta_k = opts.reference == ReferenceMode::TrueStates
                               ? dec.q.q.dot(p)
                               : eta_ref(0);
    out.theta(k) = theta_k;
    out.sync_error.row(k) = (p.array() - theta_k).transpose();
    out.corrected.row(k) =
        (p - dec.v_right_inv * obs_est.head(d)).transpose();
    {
      Eigen::VectorXd full_est(dec.state_dim());
      full_est << obs_est,
          (opts.use_time_varying_filter ? tkf.mean_est : sst.mean_est);
      out.phase_est.row(k) =
          (dec.inverse_transform * full_est).head(n).transpose();
    }
    if (k == h) break;

    const Eigen::VectorXd u = control_input(obs_est, cfg, dec);
    out.sim.u.row(k) = u.transpose();
    out.max_abs_input =
        std::max(out.max_abs_input, u.cwiseAbs().maxCoeff());

    noise.process(vx, vz);
    if (opts.record_noise) {
      out.sim.vx->row(k) = vx.transpose();
      out.sim.vz->row(k) = vz.transpose();
    }

    // Destination dynamics driven by the true drifts and the same v^x.
    if (opts.reference == ReferenceMode::Reintegrated) {
      Eigen::Vector2d qv;
      qv << dec.q.q.dot(vx.head(n)), dec.q.q.dot(vx.tail(n));
      eta_ref = dec.base_A * eta_ref + qv;
      if (m > 0) {
        const Eigen::VectorXd z = state.tail(m);
        const double qjz = dec.q.q.tail(m).dot(z);
        eta_ref += dec.base_beta * qjz;
      }
    }

    Eigen::VectorXd v(sys.state_dim());
    v << vx, vz;
    state = sys.Acal * state + sys.Bcal * u + v;
    out.sim.x.row(k + 1) = state.head(2 * n).transpose();
    out.sim.z.row(k + 1) = state.tail(m).transpose();

    const Eigen::VectorXd wk = noise.measurement();
    const Eigen::VectorXd y = sys.Ccal * state + wk;
    out.sim.y.row(k + 1) = y.transpose();
    if (opts.record_noise) out.sim.w->row(k + 1) = wk.transpose();

    if (opts.use_time_varying_filter) {
      tkf = tkf_step(tkf, y, u, dec, sys.Q, spec.r);
      out.obs_est.row(k + 1) = tkf.obs_est.transpose();
      out.mean_est.row(k + 1) = tkf.mean_est.transpose();
    } else {
      sst = sstkf_step(sst, y, u, dec, gains);
      out.obs_est.row(k + 1) = sst.obs_est.transpose();
      out.mean_est.row(k + 1) = sst.mean_est.transpose();
    }
  }
  return out;
}

}  // namespace tsgen
