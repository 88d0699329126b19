// Cosine similarity between the label sets of a few random sentences.

#include <iostream>

#include "sentlabel/sentlabel.hpp"

int main() {
  using namespace sentlabel;
  const auto generated = generate(6, 50, profiles::uniform(0.2), RngSeed{3});
  const auto& m = generated.matrix;
  for (std::size_t i = 0; i < m.rows(); ++i) {
    std::cout << "row " << i << ":";
    for (auto j : m.row(i)) std::cout << ' ' << j;
    std::cout << '\n';
  }
  for (const auto& s : run_sts(m, all_pairs(m.rows())))
    std::cout << s.row_a << " ~ " << s.row_b << "  " << s.score << '\n';
}
