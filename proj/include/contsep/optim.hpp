#pragma once

#include <vector>

#include "contsep/tensor.hpp"

namespace contsep {

struct AdamConfig {
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

// Adam over a fixed parameter list. Moments persist across step() calls for
// the lifetime of the optimizer; create a fresh instance per task.
class Adam {
  public:
    Adam(std::vector<Tensor> params, AdamConfig cfg = {});

    void step();       // reads param grads, updates values in place
    void zero_grad();  // clears param grads

    int steps_taken() const { return t_; }

  private:
    std::vector<Tensor> params_;
    std::vector<std::vector<double>> m_;
    std::vector<std::vector<double>> v_;
    AdamConfig cfg_;
    int t_ = 0;
};

}  // namespace contsep
