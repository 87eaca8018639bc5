#pragma once

#include <string>
#include <vector>

#include "mpmgan/tensor.hpp"

namespace mpmgan {

enum class GeneratorMode { vanilla, competing, conceding };
enum class MessageMode { none, message_passing, conditioned_message_passing };

const char* generator_mode_name(GeneratorMode m);
GeneratorMode generator_mode_from_name(const std::string& name);
const char* message_mode_name(MessageMode m);
MessageMode message_mode_from_name(const std::string& name);

struct ObjectiveKind {
    GeneratorMode generator_mode = GeneratorMode::vanilla;
    MessageMode message_mode = MessageMode::none;

    bool operator==(const ObjectiveKind&) const = default;
};

// Scores are clamped into [kScoreClampLo, kScoreClampHi] before any log so the
// losses stay finite at the sigmoid saturation boundary.
inline constexpr double kScoreClampLo = 1e-7;
inline constexpr double kScoreClampHi = 1.0 - 1e-7;

Tensor clamp_scores(const Tensor& scores);

// Elementwise max(x, 0), subgradient 0 at the kink.
Tensor hinge(const Tensor& x);

// Minimization objective for one generator. `other_scores` is always treated
// as a constant: the hinge term must not push gradients into the counterpart.
//   vanilla:   mean(log(1 - own))
//   competing: mean(log(1 - own) - max(own - other, 0))
//   conceding: mean(log(1 - own) + max(own - other, 0))
// With non_saturating, the first term becomes -mean(log(own)).
Tensor generator_loss(const Tensor& own_scores, const Tensor& other_scores,
                      GeneratorMode mode, bool non_saturating = false);

struct ScoreBatch {
    Tensor d_real;
    Tensor d_g1;
    Tensor d_g2;
};

// Negated three-term objective (the trainer minimizes):
//   -[mean(log d_real) + mean(log(1 - d_g1)) + mean(log(1 - d_g2))]
Tensor discriminator_loss(const ScoreBatch& scores);

// Same objective for an arbitrary set of fake-score batches.
Tensor discriminator_loss(const Tensor& d_real, const std::vector<Tensor>& d_fakes);

}  // namespace mpmgan
