#include "nearnet/topopt.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>
#include <sstream>

#include "nearnet/problem.hpp"

namespace nearnet {

void OptimizationConfig::validate() const {
  auto in_open = [](double v, double lo, double hi) { return v > lo && v < hi; };
  if (!in_open(volume_fraction, 0.0, 1.0)) throw ValidationError("volume fraction must lie in (0, 1)");
  if (!in_open(epsilon, 0.0, 1.0)) throw ValidationError("epsilon must lie in (0, 1)");
  if (!(beta >= 0.0) || !std::isfinite(beta)) throw ValidationError("beta must be non-negative");
  if (!(q >= 0.0)) throw ValidationError("q must be non-negative");
  if (!(w_acc_max >= 0.0 && w_acc_max < 1.0)) throw ValidationError("w_acc_max must lie in [0, 1)");
  if (!(w_acc_step > 0.0 && w_acc_step < 1.0)) throw ValidationError("w_acc_step must lie in (0, 1)");
  if (!(i_acc >= 0 && i_acc < i_rho && i_rho < max_iter))
    throw ValidationError("iteration schedule must satisfy 0 <= I_acc < I_rho < max_iter");
  if (!in_open(lambda, 0.0, 1.0)) throw ValidationError("lambda must lie in (0, 1)");
  if (!(move_limit > 0.0 && move_limit <= 1.0)) throw ValidationError("move limit must lie in (0, 1]");
  if (!(oc_damping > 0.0 && oc_damping <= 1.0)) throw ValidationError("OC damping must lie in (0, 1]");
  if (delta_tol && !(*delta_tol >= 0.0)) throw ValidationError("delta_tol must be non-negative");
  if (!(filter_radius >= 1.0)) throw ValidationError("filter radius must be at least one voxel");
  if (!(oc_floor > 0.0 && oc_floor < 0.1)) throw ValidationError("oc_floor must lie in (0, 0.1)");
}

DesignDomain DesignDomain::full(const GridDims& dims) { return {ScalarGrid(dims, 1.0), ScalarGrid(dims, 0.0)}; }

void DesignDomain::validate() const {
  detail::require_same_shape(design, keep, "design domain");
  if (!is_indicator(design) || !is_indicator(keep)) throw ValidationError("design and keep masks must be indicators");
  if ((keep.values() > design.values()).any()) throw ValidationError("keep-solid voxels must lie inside the design domain");
  if (count_nonzero(design) == 0) throw ValidationError("design domain is empty");
}

ScalarGrid DesignDomain::free() const { return {design.dims(), design.values() * (1.0 - keep.values())}; }

ScalarGrid heaviside_project(const ScalarGrid& rho, double beta) {
  if (!(beta >= 0.0)) throw ValidationError("heaviside_project: beta must be non-negative");
  const double eb = std::exp(-beta);
  ScalarGrid out(rho.dims(), 1.0 - (-beta * rho.values()).exp() + rho.values() * eb);
  out.values() = out.values().max(0.0).min(1.0);
  return out;
}

ScalarGrid heaviside_derivative(const ScalarGrid& rho, double beta) {
  return {rho.dims(), beta * (-beta * rho.values()).exp() + std::exp(-beta)};
}

SensitivityFilter::SensitivityFilter(const ScalarGrid& design, double radius) : design_(design) {
  if (!(radius >= 1.0)) throw ValidationError("filter radius must be at least one voxel");
  const int r = int(std::ceil(radius)) - 1;
  const int rz = design.dims().nz == 1 ? 0 : r;
  for (int k = -rz; k <= rz; ++k)
    for (int j = -r; j <= r; ++j)
      for (int i = -r; i <= r; ++i) {
        const double w = radius - std::sqrt(double(i * i + j * j + k * k));
        if (w > 0.0) {
          offsets_.emplace_back(i, j, k);
          weights_.push_back(w);
        }
      }
}

ScalarGrid SensitivityFilter::apply(const ScalarGrid& s, const ScalarGrid& rho) const {
  detail::require_same_shape(s, rho, "sensitivity filter");
  detail::require_same_shape(s, design_, "sensitivity filter");
  const GridDims& d = s.dims();
  ScalarGrid out(d);
#pragma omp parallel for schedule(static)
  for (Index e = 0; e < d.size(); ++e) {
    if (design_[e] == 0.0) continue;
    const IVec3 c = d.coords(e);
    double num = 0.0, den = 0.0;
    for (std::size_t n = 0; n < offsets_.size(); ++n) {
      const IVec3 f = c + offsets_[n];
      if (!d.contains(f)) continue;
      const Index fi = d.index(f);
      if (design_[fi] == 0.0) continue;
      num += weights_[n] * rho[fi] * s[fi];
      den += weights_[n];
    }
    out[e] = num / (std::max(1e-3, rho[e]) * den);
  }
  return out;
}

ScalarGrid accessibility_filter(const IMFField& imf, const NearNetShape& near_net, const ScalarGrid& layer_w) {
  detail::require_same_shape(imf.values, near_net.part, "accessibility_filter");
  detail::require_same_shape(imf.values, layer_w, "accessibility_filter");
  const auto in_n = (near_net.part.values() + near_net.supports.values()).min(1.0);
  return {imf.values.dims(), -in_n * layer_w.values() * imf.values.values().max(0.0).min(1.0)};
}

ScalarGrid blend_sensitivity(const ScalarGrid& s_phi_norm, const ScalarGrid& s_imf, double w_acc) {
  detail::require_same_shape(s_phi_norm, s_imf, "blend_sensitivity");
  if (!(w_acc >= 0.0 && w_acc < 1.0)) throw ValidationError("blend_sensitivity: w_acc must lie in [0, 1)");
  return {s_phi_norm.dims(), (1.0 - w_acc) * s_phi_norm.values() + w_acc * s_imf.values()};
}

ScalarGrid oc_update(const ScalarGrid& rho, const ScalarGrid& sensitivity, double volume_fraction,
                     const OptimizationConfig& cfg) {
  return oc_update(rho, sensitivity, volume_fraction, cfg, DesignDomain::full(rho.dims()));
}

ScalarGrid oc_update(const ScalarGrid& rho, const ScalarGrid& sensitivity, double volume_fraction,
                     const OptimizationConfig& cfg, const DesignDomain& domain) {
  return oc_update(rho, sensitivity, volume_fraction, cfg, domain, rho);
}

ScalarGrid oc_update(const ScalarGrid& rho, const ScalarGrid& sensitivity, double volume_fraction,
                     const OptimizationConfig& cfg, const DesignDomain& domain, const ScalarGrid& base_rho) {
  detail::require_same_shape(rho, sensitivity, "oc_update");
  detail::require_same_shape(rho, base_rho, "oc_update");
  detail::require_same_shape(rho, domain.design, "oc_update");
  if (!(volume_fraction > 0.0 && volume_fraction < 1.0)) throw ValidationError("oc_update: volume fraction must lie in (0, 1)");
  const GridDims& d = rho.dims();
  const double h = d.cell_measure();
  const ScalarGrid freem = domain.free();
  const double target = volume_fraction * integrate(domain.design);

  std::vector<Index> free_idx;
  double pinned = 0.0;
  for (Index i = 0; i < d.size(); ++i) {
    if (freem[i] != 0.0)
      free_idx.push_back(i);
    else
      pinned += (domain.keep[i] != 0.0 ? 1.0 : (domain.design[i] != 0.0 ? rho[i] : 0.0)) * h;
  }
  const std::size_t n = free_idx.size();
  std::vector<double> base(n), neg(n), lo(n), hi(n);
  for (std::size_t p = 0; p < n; ++p) {
    const Index i = free_idx[p];
    base[p] = std::max(base_rho[i], cfg.oc_floor);
    neg[p] = std::max(-sensitivity[i], 1e-12);
    lo[p] = std::max(0.0, rho[i] - cfg.move_limit);
    hi[p] = std::min(1.0, rho[i] + cfg.move_limit);
  }
  auto candidate = [&](double lam, std::size_t p) {
    return std::clamp(base[p] * std::pow(neg[p] / lam, cfg.oc_damping), lo[p], hi[p]);
  };
  auto volume = [&](double lam) {
    double v = pinned;
    for (std::size_t p = 0; p < n; ++p) v += candidate(lam, p) * h;
    return v;
  };

  double llo = std::log(1e-30), lhi = std::log(1e30);
  double lam = 1.0, err = 0.0;
  const double tol = 1e-9 * std::max(target, h);
  int halvings = 0;
  for (; halvings < 64; ++halvings) {
    lam = std::exp(0.5 * (llo + lhi));
    const double v = volume(lam);
    err = v - target;
    if (std::abs(err) <= tol) break;
    if (err > 0.0)
      llo = std::log(lam);
    else
      lhi = std::log(lam);
  }
  if (std::abs(err) > 1e-4 * integrate(domain.design)) {
    std::ostringstream os;
    os << "OC bisection failed after " << halvings << " halvings: multiplier bracket [" << std::exp(llo) << ", "
       << std::exp(lhi) << "], volume error " << err << " (target " << target << ", reachable range ["
       << volume(1e30) << ", " << volume(1e-30) << "])";
    throw NumericalError(os.str());
  }

  ScalarGrid out = rho;
  for (Index i = 0; i < d.size(); ++i)
    if (freem[i] == 0.0) out[i] = domain.keep[i] != 0.0 ? 1.0 : (domain.design[i] != 0.0 ? rho[i] : 0.0);
  for (std::size_t p = 0; p < n; ++p) out[free_idx[p]] = candidate(lam, p);
  return out;
}

PenalizedDesign seclusion_penalty(const ScalarGrid& rho, const ScalarGrid& sensitivity, const ScalarGrid& secluded,
                                  const ScalarGrid& layer_w) {
  detail::require_same_shape(rho, sensitivity, "seclusion_penalty");
  detail::require_same_shape(rho, secluded, "seclusion_penalty");
  detail::require_same_shape(rho, layer_w, "seclusion_penalty");
  PenalizedDesign out{rho, sensitivity};
  for (Index i = 0; i < rho.size(); ++i) {
    if (secluded[i] == 0.0) continue;
    out.rho[i] = std::min(rho[i] + 0.5, 1.0);
    out.sensitivity[i] = std::min(-layer_w[i], sensitivity[i]);
  }
  return out;
}

namespace {

struct Evaluation {
  ScalarGrid projected;
  NearNetShape near_net;
  FEAResult fea;
  std::optional<IMFField> imf;
  SecludedRegion secluded;
};

class Loop {
 public:
  explicit Loop(const OptimizationProblem& p)
      : p_(p),
        cfg_(p.optimizer),
        freem_(p.domain.free()),
        model_(p.dims, p.material, p.bc, p.domain.design),
        filter_(p.domain.design, p.optimizer.filter_radius),
        frame_(BuildFrame::from(p.build, p.dims)),
        layer_w_(layer_weight_field(p.dims, frame_, p.optimizer.q)) {
    if (cfg_.constrained() || cfg_.track_accessibility) cache_.emplace(orient_all(p.setup));
  }

  Evaluation evaluate(const ScalarGrid& rho) {
    Evaluation ev;
    ev.projected = heaviside_project(rho, cfg_.beta);
    ev.projected.values() *= p_.domain.design.values();
    ev.near_net = generate_supports(ev.projected, p_.build, p_.setup.platform);
    ev.fea = model_.solve(ev.projected, p_.solver, warm_.size() ? &warm_ : nullptr);
    warm_ = ev.fea.displacements;
    if (cache_) {
      ScalarGrid obstacle = assemble_obstacle_density(ev.projected, p_.setup);
      if (cfg_.supports_as_obstacles) obstacle.values() = obstacle.values().max(ev.near_net.supports.values());
      ev.imf = cache_->evaluate(obstacle);
      ev.secluded = secluded_supports(*ev.imf, ev.near_net.supports, cfg_.lambda);
    } else {
      ev.secluded.mask = ScalarGrid(p_.dims);
      ev.secluded.support_volume = integrate(ev.near_net.supports);
    }
    return ev;
  }

  ScalarGrid objective_sensitivity(const ScalarGrid& rho, const Evaluation& ev) const {
    ScalarGrid s = model_.compliance_sensitivity(ev.projected, ev.fea);
    s.values() *= heaviside_derivative(rho, cfg_.beta).values();
    return normalize_sensitivity(filter_.apply(s, rho));
  }

  const ScalarGrid& layer_weights() const { return layer_w_; }
  const ScalarGrid& free_mask() const { return freem_; }

 private:
  const OptimizationProblem& p_;
  const OptimizationConfig& cfg_;
  ScalarGrid freem_;
  ElasticityModel model_;
  SensitivityFilter filter_;
  BuildFrame frame_;
  ScalarGrid layer_w_;
  std::optional<ImfCache> cache_;
  Eigen::VectorXd warm_;
};

}  // namespace

OptimizationResult optimize(const OptimizationProblem& problem, const IterationCallback& on_iteration) {
  problem.validate();
  const OptimizationConfig& cfg = problem.optimizer;
  const DesignDomain& dom = problem.domain;
  Loop loop(problem);

  const double vol0 = integrate(dom.design);
  const double delta = cfg.delta_tol ? *cfg.delta_tol : 0.01 * vol0;
  const double keep_vol = integrate(dom.keep);
  const double free_vol = integrate(loop.free_mask());
  const double start = free_vol > 0.0 ? std::clamp((cfg.volume_fraction * vol0 - keep_vol) / free_vol, 0.0, 1.0) : 0.0;
  ScalarGrid rho(problem.dims, loop.free_mask().values() * start + dom.keep.values());

  OptimizationResult res;
  double w_acc = 0.0;
  double change = std::numeric_limits<double>::infinity();
  // Every voxel found secluded after I_rho keeps being penalized.
  ScalarGrid penalized(problem.dims);
  for (int iter = 0;; ++iter) {
    Evaluation ev = loop.evaluate(rho);
    const bool ramp_done = !cfg.constrained() || w_acc >= cfg.w_acc_max - 1e-12;
    const bool clean = !cfg.constrained() || ev.secluded.ratio <= cfg.epsilon;
    res.converged = change <= delta && ramp_done && clean;
    if (res.converged || iter == cfg.max_iter) {
      res.projected = std::move(ev.projected);
      res.near_net = std::move(ev.near_net);
      res.imf = std::move(ev.imf);
      res.secluded = std::move(ev.secluded);
      res.compliance = ev.fea.compliance;
      break;
    }

    ScalarGrid s = loop.objective_sensitivity(rho, ev);
    if (cfg.constrained() && w_acc > 0.0)
      s = blend_sensitivity(s, accessibility_filter(*ev.imf, ev.near_net, loop.layer_weights()), w_acc);

    ScalarGrid base = rho;
    if (cfg.constrained() && iter >= cfg.i_rho) {
      penalized.values() = penalized.values().max(ev.secluded.mask.values());
      PenalizedDesign pen = seclusion_penalty(rho, s, penalized, loop.layer_weights());
      base = std::move(pen.rho);
      s = std::move(pen.sensitivity);
    }
    // The raised densities feed the multiplicative step; the move limits stay on rho.
    ScalarGrid next = oc_update(rho, s, cfg.volume_fraction, cfg, dom, base);
    change = (next.values() - rho.values()).abs().sum() * problem.dims.cell_measure();

    IterationRecord rec;
    rec.iter = iter;
    rec.compliance = ev.fea.compliance;
    rec.volume = integrate(rho);
    rec.support_volume = ev.secluded.support_volume;
    rec.secluded_volume = ev.secluded.volume;
    rec.w_acc = w_acc;
    rec.change = change;
    res.history.push_back(rec);
    if (on_iteration) on_iteration(rec, next);

    rho = std::move(next);
    if (cfg.constrained() && iter + 1 > cfg.i_acc) w_acc = std::min(w_acc + cfg.w_acc_step, cfg.w_acc_max);
  }

  res.density = std::move(rho);
  res.manufacturable = !res.imf || res.secluded.ratio <= cfg.epsilon;
  return res;
}

void write_history_csv(std::ostream& os, const std::vector<IterationRecord>& history) {
  os << "iter,compliance,volume,support_volume,secluded_volume,w_acc,change\n";
  char buf[256];
  for (const auto& r : history) {
    std::snprintf(buf, sizeof buf, "%d,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g\n", r.iter, r.compliance, r.volume,
                  r.support_volume, r.secluded_volume, r.w_acc, r.change);
    os << buf;
  }
}

}  // namespace nearnet
