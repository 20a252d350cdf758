// Trains an STM and a linear SVM on synthetic rank-1 tensor data and prints
// their test accuracy.

#include <iostream>
#include <numeric>

#include "tensorhar/tensorhar.hpp"

int main() {
  using namespace tensorhar;
  const Dataset all = synth::tensor_blobs(50, {16, 3}, 3, 1.0, 1);
  std::vector<std::size_t> first(90), rest(60);
  std::iota(first.begin(), first.end(), std::size_t{0});
  std::iota(rest.begin(), rest.end(), std::size_t{90});
  const Dataset train = all.subset(first), test = all.subset(rest);
  for (const char* family : {"stm", "svm"}) {
    auto model = make_classifier(family, {{"C", 1.0}});
    model->fit(train);
    const auto report = compute_report(test.labels, model->predict_all(test), test.label_map);
    std::cout << family << " accuracy " << report.accuracy << '\n';
  }
  return 0;
}
