#include "ctcig/eval/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "ctcig/errors.hpp"

namespace ctcig::eval {

namespace {

void check_pair(const EmbeddingSet& a, const EmbeddingSet& b, int64_t min_n) {
  if (a.provider_id != b.provider_id)
    throw ValidationError("embedding providers differ: '" + a.provider_id + "' vs '" + b.provider_id + "'");
  if (a.dim() != b.dim())
    throw ValidationError("embedding dimensions differ: " + std::to_string(a.dim()) + " vs " +
                          std::to_string(b.dim()));
  if (a.size() < min_n || b.size() < min_n)
    throw ValidationError("need at least " + std::to_string(min_n) + " embeddings per set");
  if (!a.vectors.allFinite() || !b.vectors.allFinite()) throw ValidationError("non-finite embedding entries");
}

Eigen::MatrixXd covariance(const Eigen::MatrixXd& x, const Eigen::VectorXd& mu) {
  const Eigen::MatrixXd centered = x.rowwise() - mu.transpose();
  return centered.transpose() * centered / static_cast<double>(x.rows() - 1);
}

}  // namespace

FidResult fid_from_moments(const Eigen::VectorXd& mu1, const Eigen::MatrixXd& cov1, const Eigen::VectorXd& mu2,
                           const Eigen::MatrixXd& cov2) {
  if (mu1.size() != mu2.size() || cov1.rows() != mu1.size() || cov2.rows() != mu2.size())
    throw ValidationError("moment dimensions differ");
  FidResult r;
  auto clamp_sqrt = [&r](double ev) {
    if (ev < 0.0) {
      r.clamped_eigenvalue = std::min(r.clamped_eigenvalue, ev);
      return 0.0;
    }
    return std::sqrt(ev);
  };

  const Eigen::MatrixXd s1 = 0.5 * (cov1 + cov1.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es1(s1);
  Eigen::VectorXd root_ev = es1.eigenvalues().unaryExpr(clamp_sqrt);
  const Eigen::MatrixXd sqrt_s1 = es1.eigenvectors() * root_ev.asDiagonal() * es1.eigenvectors().transpose();
  Eigen::MatrixXd m = sqrt_s1 * cov2 * sqrt_s1;
  m = 0.5 * (m + m.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m, Eigen::EigenvaluesOnly);
  double tr_sqrt = 0.0;
  for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) tr_sqrt += clamp_sqrt(es.eigenvalues()[i]);

  r.value = (mu1 - mu2).squaredNorm() + cov1.trace() + cov2.trace() - 2.0 * tr_sqrt;
  r.warning = -r.clamped_eigenvalue > kSqrtmClampWarn;
  return r;
}

FidResult fid_detailed(const EmbeddingSet& real, const EmbeddingSet& fake) {
  check_pair(real, fake, 2);
  const Eigen::VectorXd mu1 = real.vectors.colwise().mean();
  const Eigen::VectorXd mu2 = fake.vectors.colwise().mean();
  return fid_from_moments(mu1, covariance(real.vectors, mu1), mu2, covariance(fake.vectors, mu2));
}

double fid(const EmbeddingSet& real, const EmbeddingSet& fake) { return fid_detailed(real, fake).value; }

double polynomial_kernel(const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
  const double v = x.dot(y) / static_cast<double>(x.size()) + 1.0;
  return v * v * v;
}

double mmd2_unbiased(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y) {
  const Eigen::Index m = x.rows();
  if (m < 2 || y.rows() != m) throw ValidationError("mmd2 needs two equally sized sets of >= 2 points");
  const double d = static_cast<double>(x.cols());
  auto kernel = [d](const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    Eigen::MatrixXd k = (a * b.transpose()).array() / d + 1.0;
    return Eigen::MatrixXd(k.array().cube());
  };
  const Eigen::MatrixXd kxx = kernel(x, x), kyy = kernel(y, y), kxy = kernel(x, y);
  const double md = static_cast<double>(m);
  const double sxx = kxx.sum() - kxx.trace();
  const double syy = kyy.sum() - kyy.trace();
  return sxx / (md * (md - 1.0)) + syy / (md * (md - 1.0)) - 2.0 * kxy.sum() / (md * md);
}

KidOptions kid_defaults(const EmbeddingSet& real, const EmbeddingSet& fake) {
  KidOptions o;
  o.subset_size = std::min<int64_t>({real.size(), fake.size(), 100});
  return o;
}

double kid(const EmbeddingSet& real, const EmbeddingSet& fake, const KidOptions& opt) {
  check_pair(real, fake, 2);
  if (opt.subset_size < 2) throw ValidationError("KID subset size must be >= 2");
  if (opt.subset_size > std::min(real.size(), fake.size()))
    throw ValidationError("KID subset size " + std::to_string(opt.subset_size) + " exceeds set size " +
                          std::to_string(std::min(real.size(), fake.size())));
  if (opt.n_subsets < 1) throw ValidationError("KID needs at least one subset");

  std::mt19937_64 rng(opt.seed);
  auto draw = [&](const Eigen::MatrixXd& src) {
    std::vector<Eigen::Index> idx(static_cast<size_t>(src.rows()));
    std::iota(idx.begin(), idx.end(), 0);
    std::shuffle(idx.begin(), idx.end(), rng);
    Eigen::MatrixXd out(opt.subset_size, src.cols());
    for (int64_t i = 0; i < opt.subset_size; ++i) out.row(i) = src.row(idx[static_cast<size_t>(i)]);
    return out;
  };
  double total = 0.0;
  for (int64_t s = 0; s < opt.n_subsets; ++s) {
    const auto x = draw(real.vectors);
    const auto y = draw(fake.vectors);
    total += mmd2_unbiased(x, y);
  }
  return total / static_cast<double>(opt.n_subsets);
}

double clip_score(const EmbeddingSet& image_embs, const EmbeddingSet& text_embs) {
  if (image_embs.size() != text_embs.size())
    throw ValidationError("image/text counts differ: " + std::to_string(image_embs.size()) + " vs " +
                          std::to_string(text_embs.size()));
  if (image_embs.size() == 0) throw ValidationError("no image/text pairs");
  if (image_embs.dim() != text_embs.dim()) throw ValidationError("image/text embedding dimensions differ");
  if (!image_embs.item_ids.empty() || !text_embs.item_ids.empty()) {
    if (image_embs.item_ids.size() != text_embs.item_ids.size())
      throw ValidationError("item id lists differ in length");
    for (size_t i = 0; i < image_embs.item_ids.size(); ++i)
      if (image_embs.item_ids[i] != text_embs.item_ids[i])
        throw ValidationError("item ids misaligned at index " + std::to_string(i) + ": '" +
                              image_embs.item_ids[i] + "' vs '" + text_embs.item_ids[i] + "'");
  }
  double total = 0.0;
  for (Eigen::Index i = 0; i < image_embs.vectors.rows(); ++i) {
    const auto a = image_embs.vectors.row(i), b = text_embs.vectors.row(i);
    const double denom = a.norm() * b.norm();
    const double cos = denom > 0.0 ? a.dot(b) / denom : 0.0;
    total += kClipScoreWeight * std::max(0.0, cos);
  }
  return total / static_cast<double>(image_embs.size());
}

nlohmann::json to_json(const MetricReport& r) {
  auto opt = [](const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); };
  return {{"fid", opt(r.fid)},           {"kid", opt(r.kid)},
          {"clip_score", opt(r.clip_score)}, {"n_real", r.n_real},
          {"n_fake", r.n_fake},          {"provider_id", r.provider_id},
          {"warnings", r.warnings}};
}

}  // namespace ctcig::eval
