// zrtopic/aud_internal.h

// Copyright 2026  The zrtopic Authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#ifndef ZRTOPIC_AUD_INTERNAL_H_
#define ZRTOPIC_AUD_INTERNAL_H_

#include "zrtopic/aud.h"

namespace zrtopic::aud_detail {

// Quadratic-form coefficients for every Gaussian of the model, laid out so
// that log-likelihoods of a frame block X are [X.^2, X] * coef + offset.
struct GaussianTable {
  Matrix coef;    // (2 * dim) x num_gaussians
  Vector offset;  // num_gaussians
};

GaussianTable gaussian_table(const PhoneLoopModel& model, HmmMode mode);

// frames x num_gaussians component log-likelihoods, mixture weight included.
Matrix component_log_likelihoods(const GaussianTable& table, const Matrix& frames);

// Per-state log-sum-exp over consecutive groups of `per_state` columns.
Matrix state_log_likelihoods(const Matrix& components, int per_state);

}  // namespace zrtopic::aud_detail

#endif  // ZRTOPIC_AUD_INTERNAL_H_
