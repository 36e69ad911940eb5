#include "qsc/replay.hpp"

#include <algorithm>
#include <stdexcept>

namespace qsc {

ReplayBuffer::ReplayBuffer(int capacity) : capacity_(capacity) {
    if (capacity < 1) {
        throw std::invalid_argument("ReplayBuffer: capacity must be >= 1");
    }
    storage_.reserve(capacity);
}

void ReplayBuffer::push(Transition t) {
    if (size() < capacity_) {
        storage_.push_back(std::move(t));
    } else {
        storage_[next_] = std::move(t);
    }
    next_ = (next_ + 1) % capacity_;
}

std::vector<const Transition*> ReplayBuffer::sample(int batch, Rng& rng) const {
    if (batch < 1 || batch > size()) {
        throw std::invalid_argument("ReplayBuffer::sample: batch must be in [1, size()]");
    }
    // Floyd's algorithm: distinct uniform indices.
    std::vector<int> chosen;
    chosen.reserve(batch);
    for (int i = size() - batch; i < size(); ++i) {
        const int j = rng.uniform_int(i + 1);
        if (std::find(chosen.begin(), chosen.end(), j) != chosen.end()) {
            chosen.push_back(i);
        } else {
            chosen.push_back(j);
        }
    }
    std::vector<const Transition*> out;
    out.reserve(batch);
    for (int idx : chosen) {
        out.push_back(&storage_[idx]);
    }
    return out;
}

}  // namespace qsc
