#pragma once

#include "atlab/common.hpp"

#include <string>

namespace atlab {
namespace theory {

// Binary task over one strongly-correlated feature x_1 and d weakly-correlated
// features x_2..x_{d+1} ~ N(eta*y, 1). The adversarial case shifts the first
// k = d/2 weak features to N(-eta*y, 1).
struct TheoryParams {
  Index d = 1000;    // number of weak features, even
  double eta = 0.11; // weak-feature mean shift
  double p = 0.5;    // P[x_1 = +y]; irrelevant to the zero-x1-weight classifiers

  void validate() const;
};

enum class Scheme { Unif, A, B };

std::string scheme_name(Scheme s);
Scheme scheme_from_name(const std::string& name);

// Linear classifier sign(w^T x) over x in R^{d+1}; weight 0 on x_1 and weak
// weights summing to 1. sign(0) counts as +1.
struct LinearClassifier {
  Scheme scheme = Scheme::Unif;
  ArrayX weights;  // length d+1

  int predict(const ArrayX& x) const {
    return (weights * x).sum() >= 0.0 ? +1 : -1;
  }
};

LinearClassifier build_classifier(Scheme scheme, Index d);

struct Sample {
  MatrixR X;            // n x (d+1)
  std::vector<int> Y;   // +/-1 labels
};

// Clean or perturbed draws. The perturbed draw equals the clean draw minus
// 2*eta*y on the first k weak features (identical distribution, paired with
// the clean sample for a shared seed).
Sample sample(const TheoryParams& params, Index n, std::uint64_t seed, bool perturbed);

// Appendix accuracy expressions through the standard normal CDF.
double closed_form_accuracy(Scheme scheme, const TheoryParams& params, bool perturbed);

struct MonteCarloResult {
  double estimate = 0.0;
  double stderr_ = 0.0;
  Index n = 0;
};

MonteCarloResult monte_carlo_accuracy(Scheme scheme, const TheoryParams& params, bool perturbed,
                                      Index n, std::uint64_t seed);

// Fraction of perturbed samples with the first classifier correct and the
// second wrong, evaluated on shared draws; defaults to the (f_A, f_B) pair.
MonteCarloResult joint_disagreement(const TheoryParams& params, Index n, std::uint64_t seed,
                                    Scheme first = Scheme::A, Scheme second = Scheme::B);

// Standard normal CDF.
double normal_cdf(double z);

}  // namespace theory
}  // namespace atlab
