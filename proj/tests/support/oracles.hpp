// SPDX-License-Identifier: Apache-2.0
//
// Independent reference implementations used by the unit and acceptance tests.
#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "epsnet/nn/gru.hpp"
#include "epsnet/nn/layers.hpp"

namespace epsnet::oracle {

using Grid = std::vector<std::vector<double>>;

inline Grid to_grid(const nn::Matrix& m) {
  Grid g(static_cast<std::size_t>(m.rows()), std::vector<double>(static_cast<std::size_t>(m.cols())));
  for (nn::Index i = 0; i < m.rows(); ++i)
    for (nn::Index j = 0; j < m.cols(); ++j) g[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = m(i, j);
  return g;
}

/// Scalar GRU recurrence, one element at a time. x[t][b][i], h0[b][k]; returns h[t][b][k].
std::vector<Grid> scalar_gru(const nn::Gru& gru, const std::vector<Grid>& x, const Grid& h0);

/// p after `steps` Adam updates with a constant gradient, written out scalar by scalar.
double adam_unrolled(double p0, double g, int steps, double lr, double b1, double b2, double eps);

/// Central finite-difference check of every entry of every parameter against its accumulated
/// gradient. `loss` must recompute the forward pass from scratch. Returns the worst relative
/// error |a - n| / max(|a|, |n|, floor).
double max_param_gradient_error(const std::function<double()>& loss, const nn::ParamList& params, double h = 1e-5,
                                double floor = 1e-6);

/// Same check for an input matrix against a supplied analytic gradient.
double max_input_gradient_error(const std::function<double(const nn::Matrix&)>& loss, const nn::Matrix& x,
                                const nn::Matrix& analytic, double h = 1e-5, double floor = 1e-6);

/// Two-sided exact Wilcoxon signed-rank p by enumerating all 2^n sign patterns of the
/// average ranks of |d| (zeros dropped): 2 * min(P(W+ <= w), P(W+ >= w)), capped at 1.
double wilcoxon_enumerated_p(const std::vector<double>& differences);

/// Two-sided exact Mann-Whitney p by enumerating every assignment of group labels to the
/// pooled average ranks.
double mann_whitney_enumerated_p(const std::vector<double>& a, const std::vector<double>& b);

/// Median by full sort, written without the library helper.
double brute_median(std::vector<double> v);

/// Percentage differences (a - p) / a computed in a plain loop.
std::vector<double> brute_percentage_differences(const std::vector<double>& actual, const std::vector<double>& pred);

/// Count implied by the layer dimensions: GRU 3(h*in + h*h + h), dense out*in + out, BN 2*features.
std::size_t closed_form_parameter_count(std::size_t acc, std::size_t g1, std::size_t g2, std::size_t market,
                                        std::size_t d1, std::size_t d2, std::size_t out);

nn::Matrix random_matrix(nn::Index rows, nn::Index cols, std::mt19937_64& rng, double scale = 1.0);

}  // namespace epsnet::oracle
