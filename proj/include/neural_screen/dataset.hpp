#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

namespace nscreen {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

struct Dataset
{
  VectorXd y;
  MatrixXd X;
  std::vector<std::string> column_names;
  std::string source_path;

  Index rows() const { return X.rows(); }
  Index cols() const { return X.cols(); }
  //! Throws schema_error / degenerate_input on inconsistent or non-finite data.
  void validate() const;
};

//! Reads a headered CSV; `target` names the response column, every other
//! column becomes a predictor in file order.
Dataset load_csv(const std::string& path, const std::string& target);
Dataset parse_csv(const std::string& text, const std::string& target);

//! Writes y first, then the predictors, with round-trip precision.
void write_csv(const Dataset& data, const std::string& path, const std::string& target = "y");
std::string format_csv(const Dataset& data, const std::string& target = "y");

} // namespace nscreen
