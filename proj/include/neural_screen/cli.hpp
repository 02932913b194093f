#pragma once

#include <string>
#include <vector>

namespace nscreen {

//! Norms of the depth-L sawtooth network on [0, 1].
struct SawtoothNorms
{
  int depth = 0;
  double value_norm = 0.0;    //!< ||zeta_L||_2 by midpoint quadrature
  double value_exact = 0.0;   //!< (2 / sqrt 3) 2^-L
  double deriv_norm = 0.0;    //!< ||zeta_L'||_2
  double smoothed_norm = 0.0; //!< L2 norm of the smoothed derivative over the interior
  double bandwidth = 0.0;
};

//! `quad_points` midpoints for the value/derivative norms, `grid_size` Riemann
//! nodes for the smoothing. The smoothed norm integrates over [h, 1 - h].
SawtoothNorms sawtooth_norms(int depth, double bandwidth, int quad_points = 1 << 18,
                             int grid_size = 1000);

//! Parses "1,2,5" into numbers.
std::vector<double> parse_number_list(const std::string& text);

//! Entry point of the neural-screen executable. Returns 0 on success, 1 on a
//! runtime failure (stage named on stderr), 2 on a usage error.
int run_command(int argc, char** argv);

} // namespace nscreen
