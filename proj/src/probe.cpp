#include "boundary/probe.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <random>

#include "boundary/common.hpp"

namespace boundary {

namespace {

constexpr char kMagic[4] = {'B', 'P', 'F', 'T'};

template <typename T>
void put(std::string& out, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.append(buf, sizeof(T));
}

template <typename T>
T take(const std::string& bytes, std::size_t& pos, const std::string& path) {
  if (pos + sizeof(T) > bytes.size()) throw ValidationError(path + ": truncated feature file");
  T v;
  std::memcpy(&v, bytes.data() + pos, sizeof(T));
  pos += sizeof(T);
  return v;
}

void validate_shapes(const FeatureSet& set, const char* which) {
  if (set.rows() < 1) throw ValidationError(std::string(which) + " feature set is empty");
  if (set.n_classes < 2) throw ValidationError(std::string(which) + " set needs >= 2 classes");
  if (static_cast<std::int64_t>(set.labels.size()) != set.rows()) {
    throw ValidationError(std::string(which) + " set: label count does not match row count");
  }
  for (auto l : set.labels) {
    if (l >= set.n_classes) {
      throw ValidationError(std::string(which) + " set: label " + std::to_string(l) +
                            " out of range for " + std::to_string(set.n_classes) + " classes");
    }
  }
}

struct Standardizer {
  Eigen::VectorXd mean;
  Eigen::VectorXd scale;

  static Standardizer fit(const Eigen::MatrixXd& x) {
    Standardizer s;
    s.mean = x.colwise().mean();
    Eigen::MatrixXd centered = x.rowwise() - s.mean.transpose();
    s.scale = (centered.array().square().colwise().mean()).sqrt();
    for (Eigen::Index d = 0; d < s.scale.size(); ++d) {
      if (s.scale(d) < 1e-8) s.scale(d) = 1.0;  // constant feature
    }
    return s;
  }

  Eigen::MatrixXd apply(const Eigen::MatrixXd& x) const {
    return (x.rowwise() - mean.transpose()).array().rowwise() / scale.transpose().array();
  }
};

// Softmax cross-entropy with an L2 penalty on the weights (not the biases).
// Returns the objective; fills probability matrix P (n x C).
double objective(const Eigen::MatrixXd& x, const std::vector<std::uint32_t>& labels,
                 const Eigen::MatrixXd& w, const Eigen::VectorXd& b, double lambda,
                 Eigen::MatrixXd& p) {
  const auto n = x.rows();
  p = x * w;  // n x C
  p.rowwise() += b.transpose();
  Eigen::VectorXd row_max = p.rowwise().maxCoeff();
  p.colwise() -= row_max;
  Eigen::VectorXd log_z = p.array().exp().rowwise().sum().log();
  double ce = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    ce += log_z(i) - p(i, static_cast<Eigen::Index>(labels[static_cast<std::size_t>(i)]));
  }
  ce /= static_cast<double>(n);
  p = (p.colwise() - log_z).array().exp();  // now actual probabilities
  return ce + 0.5 * lambda * w.squaredNorm();
}

void gradients(const Eigen::MatrixXd& x, const std::vector<std::uint32_t>& labels,
               const Eigen::MatrixXd& p, const Eigen::MatrixXd& w, double lambda,
               Eigen::MatrixXd& grad_w, Eigen::VectorXd& grad_b) {
  const auto n = x.rows();
  Eigen::MatrixXd delta = p;  // P - Y
  for (Eigen::Index i = 0; i < n; ++i) {
    delta(i, static_cast<Eigen::Index>(labels[static_cast<std::size_t>(i)])) -= 1.0;
  }
  grad_w = x.transpose() * delta / static_cast<double>(n) + lambda * w;
  grad_b = delta.colwise().mean();
}

double accuracy(const Eigen::MatrixXd& x, const std::vector<std::uint32_t>& labels,
                const Eigen::MatrixXd& w, const Eigen::VectorXd& b) {
  Eigen::MatrixXd logits = x * w;
  logits.rowwise() += b.transpose();
  std::int64_t hits = 0;
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    Eigen::Index best;
    logits.row(i).maxCoeff(&best);
    if (best == static_cast<Eigen::Index>(labels[static_cast<std::size_t>(i)])) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(logits.rows());
}

}  // namespace

void write_feature_file(const std::string& path, const FeatureSet& set) {
  if (static_cast<std::int64_t>(set.labels.size()) != set.rows()) {
    throw ValidationError("feature set: label count does not match row count");
  }
  std::string out;
  out.append(kMagic, 4);
  put<std::uint32_t>(out, kFeatureFileVersion);
  put<std::uint64_t>(out, static_cast<std::uint64_t>(set.rows()));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(set.dim()));
  put<std::uint32_t>(out, set.n_classes);
  for (std::int64_t r = 0; r < set.rows(); ++r) {
    for (std::int64_t d = 0; d < set.dim(); ++d) {
      put<float>(out, set.features(r, d));
    }
    put<std::uint32_t>(out, set.labels[static_cast<std::size_t>(r)]);
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw ValidationError("cannot write " + path);
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
}

FeatureSet read_feature_file(const std::string& path) {
  std::string bytes = read_file_bytes(path);
  std::size_t pos = 0;
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw ValidationError(path + ": bad magic, not a feature file");
  }
  pos = 4;
  auto version = take<std::uint32_t>(bytes, pos, path);
  if (version != kFeatureFileVersion) {
    throw ValidationError(path + ": unsupported feature file version " + std::to_string(version));
  }
  auto n_rows = take<std::uint64_t>(bytes, pos, path);
  auto dim = take<std::uint32_t>(bytes, pos, path);
  auto n_classes = take<std::uint32_t>(bytes, pos, path);
  std::size_t expect = pos + n_rows * (static_cast<std::size_t>(dim) * 4 + 4);
  if (bytes.size() != expect) {
    throw ValidationError(path + ": truncated feature file (expected " + std::to_string(expect) +
                          " bytes, have " + std::to_string(bytes.size()) + ")");
  }
  FeatureSet set;
  set.n_classes = n_classes;
  set.features.resize(static_cast<Eigen::Index>(n_rows), static_cast<Eigen::Index>(dim));
  set.labels.reserve(n_rows);
  for (std::uint64_t r = 0; r < n_rows; ++r) {
    for (std::uint32_t d = 0; d < dim; ++d) {
      float v = take<float>(bytes, pos, path);
      if (!std::isfinite(v)) {
        throw ValidationError(path + ": non-finite feature at row " + std::to_string(r));
      }
      set.features(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(d)) = v;
    }
    auto label = take<std::uint32_t>(bytes, pos, path);
    if (label >= n_classes) {
      throw ValidationError(path + ": label " + std::to_string(label) + " at row " +
                            std::to_string(r) + " out of range for " + std::to_string(n_classes) +
                            " classes");
    }
    set.labels.push_back(label);
  }
  return set;
}

ProbeResult train_probe(const FeatureSet& train, const FeatureSet& test, const ProbeConfig& cfg) {
  if (cfg.lambda < 0.0) throw ValidationError("probe: lambda must be >= 0");
  if (cfg.max_iters < 1) throw ValidationError("probe: max_iters must be >= 1");
  if (cfg.tol <= 0.0) throw ValidationError("probe: tol must be positive");
  validate_shapes(train, "train");
  validate_shapes(test, "test");
  if (train.dim() != test.dim()) {
    throw ValidationError("probe: train dim " + std::to_string(train.dim()) +
                          " != test dim " + std::to_string(test.dim()));
  }
  if (train.n_classes != test.n_classes) {
    throw ValidationError("probe: train has " + std::to_string(train.n_classes) +
                          " classes, test has " + std::to_string(test.n_classes));
  }

  ProbeResult result;
  result.lambda = cfg.lambda;
  result.seed = cfg.seed;

  std::vector<std::int64_t> class_counts(train.n_classes, 0);
  for (auto l : train.labels) ++class_counts[l];
  for (std::uint32_t k = 0; k < train.n_classes; ++k) {
    if (class_counts[k] == 0) {
      result.warnings.push_back("class " + std::to_string(k) + " has no training examples");
    }
  }

  Eigen::MatrixXd x_train = train.features.cast<double>();
  Eigen::MatrixXd x_test = test.features.cast<double>();
  auto standardizer = Standardizer::fit(x_train);
  x_train = standardizer.apply(x_train);
  x_test = standardizer.apply(x_test);

  const auto dim = x_train.cols();
  const auto n_classes = static_cast<Eigen::Index>(train.n_classes);
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(dim, n_classes);
  Eigen::VectorXd b = Eigen::VectorXd::Zero(n_classes);
  if (cfg.random_init) {
    std::mt19937_64 rng(cfg.seed);
    std::normal_distribution<double> dist(0.0, 0.01);
    for (Eigen::Index d = 0; d < dim; ++d) {
      for (Eigen::Index k = 0; k < n_classes; ++k) w(d, k) = dist(rng);
    }
    for (Eigen::Index k = 0; k < n_classes; ++k) b(k) = dist(rng);
  }

  Eigen::MatrixXd p;
  double loss = objective(x_train, train.labels, w, b, cfg.lambda, p);
  result.loss_history.push_back(loss);

  Eigen::MatrixXd grad_w;
  Eigen::VectorXd grad_b;
  constexpr double kArmijoC = 1e-4;
  for (int iter = 0; iter < cfg.max_iters; ++iter) {
    gradients(x_train, train.labels, p, w, cfg.lambda, grad_w, grad_b);
    double grad_inf = std::max(grad_w.cwiseAbs().maxCoeff(), grad_b.cwiseAbs().maxCoeff());
    result.final_gradient_norm = grad_inf;
    if (grad_inf <= cfg.tol) break;

    double grad_sq = grad_w.squaredNorm() + grad_b.squaredNorm();
    double step = 1.0;
    bool accepted = false;
    Eigen::MatrixXd w_next;
    Eigen::VectorXd b_next;
    Eigen::MatrixXd p_next;
    for (int half = 0; half < 60; ++half) {
      w_next = w - step * grad_w;
      b_next = b - step * grad_b;
      double next = objective(x_train, train.labels, w_next, b_next, cfg.lambda, p_next);
      if (next <= loss - kArmijoC * step * grad_sq) {
        w.swap(w_next);
        b.swap(b_next);
        p.swap(p_next);
        loss = next;
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;  // step underflow: as converged as doubles allow
    result.loss_history.push_back(loss);
    result.iterations = iter + 1;
  }
  if (result.iterations == cfg.max_iters || result.final_gradient_norm > cfg.tol) {
    // Recompute at the final point so the reported norm matches the exit state.
    gradients(x_train, train.labels, p, w, cfg.lambda, grad_w, grad_b);
    result.final_gradient_norm =
        std::max(grad_w.cwiseAbs().maxCoeff(), grad_b.cwiseAbs().maxCoeff());
  }

  result.train_accuracy = accuracy(x_train, train.labels, w, b);
  result.test_accuracy = accuracy(x_test, test.labels, w, b);
  return result;
}

GradientCheckResult gradient_check(int dim, int n_classes, int n_points, std::uint64_t seed,
                                   double h, double lambda) {
  if (dim < 1 || n_classes < 2 || n_points < 1) {
    throw ValidationError("gradient_check: need dim >= 1, n_classes >= 2, n_points >= 1");
  }
  if (h <= 0.0) throw ValidationError("gradient_check: h must be positive");

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> dist(0.0, 1.0);
  Eigen::MatrixXd x(n_points, dim);
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    for (Eigen::Index d = 0; d < x.cols(); ++d) x(i, d) = dist(rng);
  }
  std::vector<std::uint32_t> labels(static_cast<std::size_t>(n_points));
  for (auto& l : labels) l = static_cast<std::uint32_t>(rng() % static_cast<std::uint64_t>(n_classes));
  Eigen::MatrixXd w(dim, n_classes);
  for (Eigen::Index d = 0; d < w.rows(); ++d) {
    for (Eigen::Index k = 0; k < w.cols(); ++k) w(d, k) = dist(rng);
  }
  Eigen::VectorXd b(n_classes);
  for (Eigen::Index k = 0; k < b.size(); ++k) b(k) = dist(rng);

  Eigen::MatrixXd p;
  objective(x, labels, w, b, lambda, p);
  Eigen::MatrixXd grad_w;
  Eigen::VectorXd grad_b;
  gradients(x, labels, p, w, lambda, grad_w, grad_b);

  Eigen::MatrixXd scratch;
  auto loss_at = [&](const Eigen::MatrixXd& wq, const Eigen::VectorXd& bq) {
    return objective(x, labels, wq, bq, lambda, scratch);
  };

  GradientCheckResult res;
  double sq_sum = 0.0;
  auto compare = [&](double analytic, double fd) {
    double abs_err = std::abs(analytic - fd);
    double denom = std::max({1e-4, std::abs(analytic), std::abs(fd)});
    res.max_abs_error = std::max(res.max_abs_error, abs_err);
    res.max_rel_error = std::max(res.max_rel_error, abs_err / denom);
    sq_sum += abs_err * abs_err;
  };
  for (Eigen::Index d = 0; d < w.rows(); ++d) {
    for (Eigen::Index k = 0; k < w.cols(); ++k) {
      Eigen::MatrixXd wq = w;
      wq(d, k) = w(d, k) + h;
      double hi = loss_at(wq, b);
      wq(d, k) = w(d, k) - h;
      double lo = loss_at(wq, b);
      compare(grad_w(d, k), (hi - lo) / (2.0 * h));
    }
  }
  for (Eigen::Index k = 0; k < b.size(); ++k) {
    Eigen::VectorXd bq = b;
    bq(k) = b(k) + h;
    double hi = loss_at(w, bq);
    bq(k) = b(k) - h;
    double lo = loss_at(w, bq);
    compare(grad_b(k), (hi - lo) / (2.0 * h));
  }
  res.l2_error = std::sqrt(sq_sum);
  return res;
}

}  // namespace boundary
