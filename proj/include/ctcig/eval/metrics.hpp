#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

namespace ctcig::eval {

/// One embedding vector per row.
struct EmbeddingSet {
  Eigen::MatrixXd vectors;
  std::string provider_id;
  std::vector<std::string> item_ids;

  int64_t size() const { return vectors.rows(); }
  int64_t dim() const { return vectors.cols(); }
};

struct FidResult {
  double value = 0.0;
  /// Most negative eigenvalue clamped in the matrix square root (0 if none).
  double clamped_eigenvalue = 0.0;
  /// Set when |clamped_eigenvalue| exceeded 1e-6.
  bool warning = false;
};

inline constexpr double kSqrtmClampWarn = 1e-6;

/// ||mu1 - mu2||^2 + Tr(S1 + S2 - 2 (S1 S2)^{1/2}), with the trace of the
/// square root taken as the eigenvalue square roots of the symmetric
/// S1^{1/2} S2 S1^{1/2}.
FidResult fid_from_moments(const Eigen::VectorXd& mu1, const Eigen::MatrixXd& cov1,
                           const Eigen::VectorXd& mu2, const Eigen::MatrixXd& cov2);

/// Gaussian fits use the unbiased (n-1) covariance.
FidResult fid_detailed(const EmbeddingSet& real, const EmbeddingSet& fake);
double fid(const EmbeddingSet& real, const EmbeddingSet& fake);

/// k(x, y) = (x.y / d + 1)^3.
double polynomial_kernel(const Eigen::VectorXd& x, const Eigen::VectorXd& y);

/// Unbiased MMD^2 between two equally sized point sets (rows).
double mmd2_unbiased(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y);

struct KidOptions {
  int64_t subset_size = 100;  // clipped to min(n_real, n_fake) by kid_defaults()
  int64_t n_subsets = 10;
  uint64_t seed = 0;
};

KidOptions kid_defaults(const EmbeddingSet& real, const EmbeddingSet& fake);

/// Mean unbiased MMD^2 over random subsets drawn without replacement.
double kid(const EmbeddingSet& real, const EmbeddingSet& fake, const KidOptions& opt);

inline constexpr double kClipScoreWeight = 2.5;

/// Mean of 2.5 * max(0, cos(image_i, text_i)) over aligned items.
double clip_score(const EmbeddingSet& image_embs, const EmbeddingSet& text_embs);

struct MetricReport {
  std::optional<double> fid;
  std::optional<double> kid;
  std::optional<double> clip_score;
  int64_t n_real = 0;
  int64_t n_fake = 0;
  std::string provider_id;
  std::vector<std::string> warnings;
};

nlohmann::json to_json(const MetricReport& r);

}  // namespace ctcig::eval
