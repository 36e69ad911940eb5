#pragma once

#include <Eigen/Dense>
#include <vector>

#include "qsc/rng.hpp"

namespace qsc {

struct Transition {
    Eigen::VectorXd state;
    int action = 0;
    double reward = 0.0;
    Eigen::VectorXd next_state;
    bool done = false;
};

// Fixed-capacity ring buffer with uniform batch sampling; indices within one
// batch are distinct.
class ReplayBuffer {
  public:
    explicit ReplayBuffer(int capacity);

    void push(Transition t);
    int size() const { return static_cast<int>(storage_.size()); }
    int capacity() const { return capacity_; }

    // Requires size() >= batch.
    std::vector<const Transition*> sample(int batch, Rng& rng) const;

  private:
    int capacity_;
    int next_ = 0;
    std::vector<Transition> storage_;
};

}  // namespace qsc
