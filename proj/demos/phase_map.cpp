// Maps the equilibrium structure over the (theta_1, pb_1) square and writes
// the grid plus analytic boundary curves as CSV. Output directory is argv[1]
// (default ./phase_map_out).

#include <filesystem>
#include <iostream>
#include <string>

#include "agora/io.hpp"

int main(int argc, char** argv) {
  const std::string out_dir = argc > 1 ? argv[1] : "phase_map_out";
  agora::GameParams par;  // defaults; only theta and pb vary across the map

  const int n_theta = 48, n_pb = 48, grid_n = 64;
  std::cout << "scanning " << n_theta << "x" << n_pb << " parameter cells...\n";
  const agora::PhaseDiagram pd = agora::phase_diagram(par, n_theta, n_pb, grid_n, 1);

  int het = 0, split = 0, partial = 0;
  for (const auto& c : pd.cells) {
    het += c.has_pot_heterogeneous;
    split += c.has_pure_split;
    partial += c.partially_het_count > 0;
  }
  const int total = n_theta * n_pb;
  std::cout << "potentially heterogeneous: " << het << "/" << total << "\n"
            << "pure split equilibrium:    " << split << "/" << total << "\n"
            << "partial mixing:            " << partial << "/" << total << "\n";

  std::filesystem::create_directories(out_dir);
  agora::write_phase_csv(out_dir + "/phase_grid.csv", out_dir + "/phase_boundary.csv", pd, {});
  std::cout << "wrote " << out_dir << "/phase_grid.csv and phase_boundary.csv\n";
  return 0;
}
