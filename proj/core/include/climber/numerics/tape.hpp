#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "climber/numerics/tensor.hpp"

namespace climber::numerics {

// Define-by-run record of forward ops. A fresh tape is built for every
// forward pass; ops append to whichever tape is active on the calling thread
// (see RecordingScope) when at least one input requires a gradient.
class Tape {
 public:
  using BackwardFn = std::function<void()>;

  void record(std::vector<Tensor> inputs, Tensor output, BackwardFn backward);

  // Zeroes every gradient reachable from the recorded nodes, seeds d(loss) = 1
  // and replays the backward rules in reverse record order.
  // Throws ContractError if `loss` is not a single value produced on this tape.
  void backward(const Tensor& loss);

  std::size_t size() const { return nodes_.size(); }
  bool empty() const { return nodes_.empty(); }
  void clear() { nodes_.clear(); }

 private:
  struct Node {
    std::vector<Tensor> inputs;
    Tensor output;
    BackwardFn backward;
  };
  std::vector<Node> nodes_;
};

// The tape new ops record onto, or nullptr when recording is off.
Tape* active_tape();

class RecordingScope {
 public:
  explicit RecordingScope(Tape& tape);
  ~RecordingScope();
  RecordingScope(const RecordingScope&) = delete;
  RecordingScope& operator=(const RecordingScope&) = delete;

 private:
  Tape* previous_;
};

// Suspends recording, e.g. for finite-difference probes inside a taped region.
class NoRecordingScope {
 public:
  NoRecordingScope();
  ~NoRecordingScope();
  NoRecordingScope(const NoRecordingScope&) = delete;
  NoRecordingScope& operator=(const NoRecordingScope&) = delete;

 private:
  Tape* previous_;
};

}  // namespace climber::numerics
