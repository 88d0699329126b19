// Rank-r reconstruction loss per density group on a small matrix.
//   sample_reconstruction_loss [rows] [cols] [rank]

#include <cstdlib>
#include <iostream>

#include "sentlabel/sentlabel.hpp"

int main(int argc, char** argv) {
  using namespace sentlabel;
  const std::size_t rows = argc > 1 ? std::strtoul(argv[1], nullptr, 10) : 400;
  const std::size_t cols = argc > 2 ? std::strtoul(argv[2], nullptr, 10) : 430;
  const Eigen::Index rank = argc > 3 ? std::strtol(argv[3], nullptr, 10) : 20;

  const auto profile = profiles::table1_even();
  auto generated = generate(rows, cols, profile, RngSeed{7});
  const auto full = svd_full(generated.matrix);
  const auto approx = reconstruct(truncate(full, rank));
  const auto losses = row_l1_loss(generated.matrix, approx, generated.group_of_row);

  std::cout << "matrix " << rows << "x" << cols << ", " << generated.matrix.nnz() << " ones, rank " << rank << "\n";
  for (const auto& g : group_stats(losses, profile))
    std::cout << "  density " << g.density << "  rows " << g.n_rows << "  mean L1 " << g.mean_loss << "  std "
              << g.std_loss << "\n";
  std::cout << "Frobenius error^2 " << eym_bound(full, rank) << "\n";
}
