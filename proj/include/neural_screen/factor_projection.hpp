#pragma once

#include <Eigen/Dense>

namespace nscreen {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

//! Pretrained d x rbar projection W. Diversified factors are d^{-1} W^T x.
struct DiversifiedProjector
{
  MatrixXd W;
  Index ambient_dim = 0;
  Index factor_bound = 0;
  Index reserved_count = 0;
};

//! W = sqrt(d) * (top-rbar eigenvectors of the centered sample covariance),
//! each column sign-flipped so its largest-magnitude entry is positive.
//! Uses the d x d covariance for d <= 2000 and the m x m Gram matrix above.
DiversifiedProjector pretrain_projector(const MatrixXd& reserved, Index rbar);

VectorXd diversify(const DiversifiedProjector& proj, const VectorXd& x);
//! Row-wise diversify: n x d -> n x rbar.
MatrixXd diversify_rows(const DiversifiedProjector& proj, const MatrixXd& rows);

} // namespace nscreen
