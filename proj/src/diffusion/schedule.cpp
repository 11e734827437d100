#include "ctcig/diffusion/schedule.hpp"

#include <cmath>
#include <numbers>

namespace ctcig::diffusion {

ScheduleKind parse_schedule_kind(const std::string& s) {
  if (s == "linear_beta" || s == "linear") return ScheduleKind::linear_beta;
  if (s == "cosine") return ScheduleKind::cosine;
  throw ConfigError("schedule_kind", "unknown schedule '" + s + "'");
}

std::string to_string(ScheduleKind k) {
  return k == ScheduleKind::cosine ? "cosine" : "linear_beta";
}

double NoiseSchedule::alpha_bar(int64_t t) const {
  if (t == -1) return 1.0;
  if (t < 0 || t >= T)
    throw ConfigError("t", "timestep " + std::to_string(t) + " outside [0," + std::to_string(T) + ")");
  return alpha_bars[static_cast<size_t>(t)];
}

NoiseSchedule NoiseSchedule::from_alphas(std::vector<double> alphas, ScheduleKind kind) {
  if (alphas.empty()) throw ConfigError("alphas", "empty alpha table");
  NoiseSchedule s;
  s.kind = kind;
  s.T = static_cast<int64_t>(alphas.size());
  s.alpha_bars.resize(alphas.size());
  double prod = 1.0;
  for (size_t i = 0; i < alphas.size(); ++i) {
    if (!(alphas[i] > 0.0 && alphas[i] < 1.0))
      throw ConfigError("alphas", "alpha[" + std::to_string(i) + "] = " + std::to_string(alphas[i]) +
                                      " not in (0,1)");
    prod *= alphas[i];
    s.alpha_bars[i] = prod;
  }
  s.alphas = std::move(alphas);
  return s;
}

NoiseSchedule make_schedule(ScheduleKind kind, int64_t T, std::pair<double, double> beta_range) {
  if (T < 2) throw ConfigError("T", "need at least 2 diffusion steps, got " + std::to_string(T));
  std::vector<double> alphas(static_cast<size_t>(T));
  if (kind == ScheduleKind::linear_beta) {
    const auto [lo, hi] = beta_range;
    if (!(lo > 0.0)) throw ConfigError("beta_min", "must be > 0");
    if (!(hi < 1.0)) throw ConfigError("beta_max", "must be < 1");
    if (!(lo < hi)) throw ConfigError("beta_range", "beta_min must be < beta_max");
    for (int64_t i = 0; i < T; ++i) {
      const double beta = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(T - 1);
      alphas[static_cast<size_t>(i)] = 1.0 - beta;
    }
  } else {
    constexpr double s = 0.008;
    auto f = [&](double t) {
      const double c = std::cos((t / static_cast<double>(T) + s) / (1.0 + s) * std::numbers::pi / 2.0);
      return c * c;
    };
    const double f0 = f(0.0);
    for (int64_t i = 0; i < T; ++i) {
      const double ab = f(static_cast<double>(i + 1)) / f0;
      const double ab_prev = f(static_cast<double>(i)) / f0;
      const double beta = std::min(1.0 - ab / ab_prev, 0.999);
      alphas[static_cast<size_t>(i)] = 1.0 - beta;
    }
  }
  return NoiseSchedule::from_alphas(std::move(alphas), kind);
}

torch::Tensor gather_alpha_bar(const NoiseSchedule& sched, const torch::Tensor& t,
                               const torch::Tensor& like) {
  auto table = torch::tensor(sched.alpha_bars, torch::kDouble);
  auto idx = t.to(torch::kLong).cpu();
  if (idx.numel() > 0 && (idx.min().item<int64_t>() < 0 || idx.max().item<int64_t>() >= sched.T))
    throw ConfigError("t", "timestep outside [0,T)");
  return table.index_select(0, idx).to(like.scalar_type()).view({-1, 1, 1, 1});
}

FeatureMap q_sample(const FeatureMap& x0, int64_t t, const FeatureMap& eps,
                    const NoiseSchedule& sched) {
  require_same_shape(x0, eps, "q_sample eps vs x0");
  if (t < -1 || t >= sched.T) throw ConfigError("t", "timestep outside [-1,T)");
  const double ab = sched.alpha_bar(t);
  return std::sqrt(ab) * x0 + std::sqrt(1.0 - ab) * eps;
}

FeatureMap q_sample(const FeatureMap& x0, const torch::Tensor& t, const FeatureMap& eps,
                    const NoiseSchedule& sched) {
  require_same_shape(x0, eps, "q_sample eps vs x0");
  if (t.numel() != x0.size(0)) throw DimensionError("q_sample: one timestep per batch item");
  auto ab = gather_alpha_bar(sched, t, x0);
  return ab.sqrt() * x0 + (1.0 - ab).sqrt() * eps;
}

namespace {
constexpr double kMinAlphaBar = 1e-8;
}

FeatureMap predict_x0(const FeatureMap& xt, const FeatureMap& eps_pred, int64_t t,
                      const NoiseSchedule& sched) {
  require_same_shape(xt, eps_pred, "predict_x0 eps_pred vs xt");
  const double ab = sched.alpha_bar(t);
  if (ab < kMinAlphaBar)
    throw NumericalDomainError("alpha_bar(" + std::to_string(t) + ") = " + std::to_string(ab) +
                               " below 1e-8");
  return (xt - std::sqrt(1.0 - ab) * eps_pred) / std::sqrt(ab);
}

FeatureMap predict_x0(const FeatureMap& xt, const FeatureMap& eps_pred, const torch::Tensor& t,
                      const NoiseSchedule& sched) {
  require_same_shape(xt, eps_pred, "predict_x0 eps_pred vs xt");
  auto ab = gather_alpha_bar(sched, t, xt);
  if (ab.min().item<double>() < kMinAlphaBar) throw NumericalDomainError("alpha_bar below 1e-8");
  return (xt - (1.0 - ab).sqrt() * eps_pred) / ab.sqrt();
}

}  // namespace ctcig::diffusion
