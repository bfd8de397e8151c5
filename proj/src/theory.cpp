#include "atlab/theory.hpp"

#include <cmath>
#include <random>

namespace atlab {
namespace theory {

void TheoryParams::validate() const {
  if (d < 2 || d % 2 != 0) throw std::invalid_argument("theory: d must be even and >= 2");
  if (!(eta >= 0.0)) throw std::invalid_argument("theory: eta must be >= 0");
  if (p < 0.0 || p > 1.0) throw std::invalid_argument("theory: p must be in [0,1]");
}

std::string scheme_name(Scheme s) {
  switch (s) {
    case Scheme::Unif: return "unif";
    case Scheme::A: return "A";
    case Scheme::B: return "B";
  }
  return "?";
}

Scheme scheme_from_name(const std::string& name) {
  if (name == "unif" || name == "Unif") return Scheme::Unif;
  if (name == "A" || name == "a") return Scheme::A;
  if (name == "B" || name == "b") return Scheme::B;
  throw FormatError("unknown classifier scheme: " + name);
}

LinearClassifier build_classifier(Scheme scheme, Index d) {
  if (d < 2) throw std::invalid_argument("build_classifier: d >= 2");
  LinearClassifier f;
  f.scheme = scheme;
  f.weights = ArrayX::Zero(d + 1);
  const double dd = static_cast<double>(d);
  switch (scheme) {
    case Scheme::Unif:
      for (Index i = 1; i <= d; ++i) f.weights[i] = 1.0 / dd;
      break;
    case Scheme::A:
      for (Index i = 1; i <= d; ++i)
        f.weights[i] = 2.0 * static_cast<double>(i) / (dd * (dd + 1.0));
      break;
    case Scheme::B:
      for (Index i = 1; i <= d; ++i)
        f.weights[i] = 2.0 * static_cast<double>(d + 1 - i) / (dd * (dd + 1.0));
      break;
  }
  return f;
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

Sample sample(const TheoryParams& params, Index n, std::uint64_t seed, bool perturbed) {
  params.validate();
  if (n < 1) throw std::invalid_argument("sample: n >= 1");
  const Index d = params.d, k = d / 2;
  Sample s;
  s.X.resize(n, d + 1);
  s.Y.resize(static_cast<std::size_t>(n));
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (Index i = 0; i < n; ++i) {
    const int y = unif(rng) < 0.5 ? +1 : -1;
    s.Y[static_cast<std::size_t>(i)] = y;
    s.X(i, 0) = unif(rng) < params.p ? +y : -y;
    for (Index j = 1; j <= d; ++j) s.X(i, j) = params.eta * y + normal(rng);
    if (perturbed) {
      // Clean draw minus 2*eta*y on the first k weak features.
      for (Index j = 1; j <= k; ++j) s.X(i, j) -= 2.0 * params.eta * y;
    }
  }
  return s;
}

namespace {

// Mean/stddev of w^T x conditioned on y = +1 (the situation is symmetric).
void score_moments(Scheme scheme, const TheoryParams& params, bool perturbed, double* mean,
                   double* sd) {
  const double d = static_cast<double>(params.d);
  const double k = d / 2.0;
  double wsum_hi = 0.0, wsum_lo = 0.0, wsq = 0.0;
  // weak weights: unif w_i = 1/d; A w_i = 2i/(d(d+1)); B w_i = 2(d+1-i)/(d(d+1)).
  switch (scheme) {
    case Scheme::Unif:
      wsum_lo = k / d;
      wsum_hi = (d - k) / d;
      wsq = 1.0 / d;
      break;
    case Scheme::A: {
      const double denom = d * (d + 1.0);
      wsum_lo = 2.0 * (k * (k + 1.0) / 2.0) / denom;
      wsum_hi = 2.0 * (d * (d + 1.0) / 2.0 - k * (k + 1.0) / 2.0) / denom;
      wsq = 4.0 * (d * (d + 1.0) * (2.0 * d + 1.0) / 6.0) / (denom * denom);
      break;
    }
    case Scheme::B: {
      // Mirror of A: the first k weights of B are the last k of A.
      const double denom = d * (d + 1.0);
      const double total = d * (d + 1.0) / 2.0;
      const double first_k_of_A = k * (k + 1.0) / 2.0;
      wsum_lo = 2.0 * (total - first_k_of_A) / denom;
      wsum_hi = 2.0 * first_k_of_A / denom;
      wsq = 4.0 * (d * (d + 1.0) * (2.0 * d + 1.0) / 6.0) / (denom * denom);
      break;
    }
  }
  const double eta = params.eta;
  // Clean: all weak features at +eta. Perturbed: first k at -eta.
  *mean = perturbed ? eta * (wsum_hi - wsum_lo) : eta * (wsum_hi + wsum_lo);
  *sd = std::sqrt(wsq);
}

}  // namespace

double closed_form_accuracy(Scheme scheme, const TheoryParams& params, bool perturbed) {
  params.validate();
  double mean = 0.0, sd = 0.0;
  score_moments(scheme, params, perturbed, &mean, &sd);
  if (scheme == Scheme::B && perturbed) {
    // Phi(-z) computed as 1 - Phi(z) so that the A/B perturbed pair sums to 1.
    double mean_a = 0.0, sd_a = 0.0;
    score_moments(Scheme::A, params, true, &mean_a, &sd_a);
    return 1.0 - normal_cdf(mean_a / sd_a);
  }
  return normal_cdf(mean / sd);
}

MonteCarloResult monte_carlo_accuracy(Scheme scheme, const TheoryParams& params, bool perturbed,
                                      Index n, std::uint64_t seed) {
  params.validate();
  if (n < 100) throw std::invalid_argument("monte_carlo_accuracy: n >= 100");
  const LinearClassifier f = build_classifier(scheme, params.d);
  const Index d = params.d, k = d / 2;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  Index hits = 0;
  for (Index i = 0; i < n; ++i) {
    const int y = unif(rng) < 0.5 ? +1 : -1;
    (void)(unif(rng) < params.p);  // x_1 draw; weight is zero for all schemes
    double score = 0.0;
    for (Index j = 1; j <= d; ++j) {
      double x = params.eta * y + normal(rng);
      if (perturbed && j <= k) x -= 2.0 * params.eta * y;
      score += f.weights[j] * x;
    }
    const int pred = score >= 0.0 ? +1 : -1;
    hits += pred == y;
  }
  MonteCarloResult r;
  r.n = n;
  r.estimate = static_cast<double>(hits) / static_cast<double>(n);
  r.stderr_ = std::sqrt(r.estimate * (1.0 - r.estimate) / static_cast<double>(n));
  return r;
}

MonteCarloResult joint_disagreement(const TheoryParams& params, Index n, std::uint64_t seed,
                                    Scheme first, Scheme second) {
  params.validate();
  if (n < 100) throw std::invalid_argument("joint_disagreement: n >= 100");
  const LinearClassifier fa = build_classifier(first, params.d);
  const LinearClassifier fb = build_classifier(second, params.d);
  const Index d = params.d, k = d / 2;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  Index joint = 0;
  for (Index i = 0; i < n; ++i) {
    const int y = unif(rng) < 0.5 ? +1 : -1;
    (void)(unif(rng) < params.p);
    double score_a = 0.0, score_b = 0.0;
    for (Index j = 1; j <= d; ++j) {
      double x = params.eta * y + normal(rng);
      if (j <= k) x -= 2.0 * params.eta * y;  // perturbed shared draw
      score_a += fa.weights[j] * x;
      score_b += fb.weights[j] * x;
    }
    const int pa = score_a >= 0.0 ? +1 : -1;
    const int pb = score_b >= 0.0 ? +1 : -1;
    joint += (pa == y) && (pb != y);
  }
  MonteCarloResult r;
  r.n = n;
  r.estimate = static_cast<double>(joint) / static_cast<double>(n);
  r.stderr_ = std::sqrt(r.estimate * (1.0 - r.estimate) / static_cast<double>(n));
  return r;
}

}  // namespace theory
}  // namespace atlab
