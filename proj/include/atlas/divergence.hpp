#pragma once

#include "atlas/types.hpp"

namespace atlas {

// Jensen-Shannon divergence in bits (range [0, 1]) with 0 log 0 := 0. Inputs
// must be nonnegative; they are renormalized when the sum is off by > 1e-9.
double js_divergence(const VectorXd& p, const VectorXd& q);

// Total variation, 0.5 * ||p - q||_1, same input handling as js_divergence.
double tv_distance(const VectorXd& p, const VectorXd& q);

// KL(p || q) in nats; +inf when p puts mass where q has none.
double kl_divergence(const VectorXd& p, const VectorXd& q);

}  // namespace atlas
