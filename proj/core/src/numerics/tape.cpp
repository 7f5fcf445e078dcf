#include "climber/numerics/tape.hpp"

#include <algorithm>

#include "climber/errors.hpp"

namespace climber::numerics {

namespace {
thread_local Tape* g_active_tape = nullptr;
}

void Tape::record(std::vector<Tensor> inputs, Tensor output, BackwardFn backward) {
  output.set_requires_grad(true);
  nodes_.push_back(Node{std::move(inputs), std::move(output), std::move(backward)});
}

void Tape::backward(const Tensor& loss) {
  if (loss.size() != 1) {
    throw ContractError("backward() needs a scalar loss, got shape " + shape_string(loss.shape()));
  }
  const bool recorded = std::any_of(nodes_.rbegin(), nodes_.rend(),
                                    [&](const Node& n) { return n.output.same_storage(loss); });
  if (!recorded) throw ContractError("backward() loss was not produced by an op on this tape");

  for (auto& node : nodes_) {
    node.output.zero_grad();
    for (auto& in : node.inputs) {
      if (in.requires_grad()) in.zero_grad();
    }
  }
  Tensor seed = loss;
  seed.grad()[0] = 1.0;
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) it->backward();
}

Tape* active_tape() { return g_active_tape; }

RecordingScope::RecordingScope(Tape& tape) : previous_(g_active_tape) { g_active_tape = &tape; }

RecordingScope::~RecordingScope() { g_active_tape = previous_; }

NoRecordingScope::NoRecordingScope() : previous_(g_active_tape) { g_active_tape = nullptr; }

NoRecordingScope::~NoRecordingScope() { g_active_tape = previous_; }

}  // namespace climber::numerics
