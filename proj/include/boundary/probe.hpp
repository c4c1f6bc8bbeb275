#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace boundary {

// Row-major feature table with one u32 label per row. On disk: magic "BPFT",
// version u32, n_rows u64, dim u32, n_classes u32, then rows of dim
// little-endian f32 followed by the label. Little-endian throughout.
struct FeatureSet {
  Eigen::MatrixXf features;  // n_rows x dim
  std::vector<std::uint32_t> labels;
  std::uint32_t n_classes = 0;

  std::int64_t rows() const { return features.rows(); }
  std::int64_t dim() const { return features.cols(); }
};

inline constexpr std::uint32_t kFeatureFileVersion = 1;

FeatureSet read_feature_file(const std::string& path);
void write_feature_file(const std::string& path, const FeatureSet& set);

struct ProbeConfig {
  double lambda = 1e-4;
  int max_iters = 2000;
  double tol = 1e-6;  // gradient infinity-norm stopping threshold
  std::uint64_t seed = 0;
  bool random_init = false;  // test-only alternative start
};

struct ProbeResult {
  double train_accuracy = 0.0;
  double test_accuracy = 0.0;
  double lambda = 0.0;
  int iterations = 0;
  double final_gradient_norm = 0.0;
  std::uint64_t seed = 0;
  std::vector<double> loss_history;       // objective after each accepted step
  std::vector<std::string> warnings;      // e.g. empty classes in training
};

// Multinomial logistic regression on standardized features, trained by
// full-batch gradient descent with Armijo backtracking from zero init.
ProbeResult train_probe(const FeatureSet& train, const FeatureSet& test, const ProbeConfig& cfg);

struct GradientCheckResult {
  double max_rel_error = 0.0;
  double max_abs_error = 0.0;
  double l2_error = 0.0;
};

// Compares the analytic gradient against central finite differences at a
// random parameter point of a random small instance.
GradientCheckResult gradient_check(int dim, int n_classes, int n_points, std::uint64_t seed,
                                   double h = 1e-5, double lambda = 1e-2);

}  // namespace boundary
