#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "localguard/classifier.hpp"
#include "localguard/eval.hpp"
#include "localguard/labeller.hpp"
#include "localguard/taxonomy.hpp"

namespace lgtest {

/// Enumerates every distinct score as a threshold (descending), predicts
/// score >= t, and sums (R(t) - R(prev)) * P(t). Quadratic; for small n.
double pr_auc_oracle(const std::vector<localguard::ScoredExample>& examples);

/// Unanimity / strict-majority rule by direct counting.
localguard::TriState aggregate_oracle(const std::vector<bool>& votes, localguard::Policy policy);

/// Tri-state OR written as an explicit case table.
localguard::TriState derive_binary_oracle(const std::array<localguard::TriState, 7>& states);

/// Full-batch gradient descent on ||Xc w - yc||^2 + alpha ||w||^2 over
/// centred data, in plain loops. Returns w followed by the intercept.
std::vector<double> ridge_gd_oracle(const std::vector<std::vector<double>>& X, const std::vector<double>& y,
                                    double alpha);

/// Mean binary cross-entropy of the network without dropout, in plain loops.
double nn_loss_oracle(const localguard::NeuralModel& model, const localguard::Matrix& X,
                      const localguard::Vector& y);

/// A small network and batch whose hidden pre-activations all stay at least
/// 0.05 away from the ReLU kink, so finite differences are smooth.
struct NnProblem {
  localguard::NeuralModel model;
  localguard::Matrix X;
  localguard::Vector y;
};
NnProblem random_nn_problem(uint64_t seed, size_t n = 5, size_t dim = 3, size_t hidden = 4);

/// Max over all parameters of |analytic - numeric| / max(|analytic|, |numeric|, 1e-3),
/// numeric gradients by central differences of nn_loss_oracle at step eps.
double nn_gradcheck(const localguard::NeuralModel& model, const localguard::Matrix& X,
                    const localguard::Vector& y, double eps = 1e-4);

/// Standard normal draws from a seeded generator.
std::vector<double> normals(uint64_t seed, size_t n);

}  // namespace lgtest
