#include "mpmgan/objectives.hpp"

#include <cmath>

#include "mpmgan/errors.hpp"

namespace mpmgan {

const char* generator_mode_name(GeneratorMode m) {
    switch (m) {
        case GeneratorMode::vanilla: return "vanilla";
        case GeneratorMode::competing: return "competing";
        case GeneratorMode::conceding: return "conceding";
    }
    return "?";
}

GeneratorMode generator_mode_from_name(const std::string& name) {
    if (name == "vanilla") return GeneratorMode::vanilla;
    if (name == "competing") return GeneratorMode::competing;
    if (name == "conceding") return GeneratorMode::conceding;
    throw ConfigError("unknown generator_mode \"" + name + "\"");
}

const char* message_mode_name(MessageMode m) {
    switch (m) {
        case MessageMode::none: return "none";
        case MessageMode::message_passing: return "message_passing";
        case MessageMode::conditioned_message_passing: return "conditioned_message_passing";
    }
    return "?";
}

MessageMode message_mode_from_name(const std::string& name) {
    if (name == "none") return MessageMode::none;
    if (name == "message_passing") return MessageMode::message_passing;
    if (name == "conditioned_message_passing")
        return MessageMode::conditioned_message_passing;
    throw ConfigError("unknown message_mode \"" + name + "\"");
}

Tensor clamp_scores(const Tensor& scores) {
    for (double v : scores.values()) {
        if (!std::isfinite(v)) {
            throw DomainError("score " + std::to_string(v) + " is not finite");
        }
    }
    // min(max(s, lo), hi) composed from hinge ops; subgradient is 1 strictly
    // inside the band and 0 at or beyond the clamp boundary.
    Tensor lo = Tensor::full(scores.shape(), kScoreClampLo);
    Tensor hi = Tensor::full(scores.shape(), kScoreClampHi);
    Tensor raised = add(lo, max_with_zero(sub(scores, lo)));
    return sub(hi, max_with_zero(sub(hi, raised)));
}

Tensor hinge(const Tensor& x) { return max_with_zero(x); }

namespace {

void check_scores(const char* where, const Tensor& s) {
    for (double v : s.values()) {
        if (!(v > 0.0 && v < 1.0)) {
            throw DomainError(std::string(where) + ": score " + std::to_string(v) +
                              " outside (0,1) after clamping");
        }
    }
}

}  // namespace

Tensor generator_loss(const Tensor& own_scores, const Tensor& other_scores,
                      GeneratorMode mode, bool non_saturating) {
    if (own_scores.shape() != other_scores.shape()) {
        throw ShapeError("generator_loss: own " + shape_str(own_scores.shape()) +
                         " vs other " + shape_str(other_scores.shape()));
    }
    Tensor own = clamp_scores(own_scores);
    Tensor other = clamp_scores(other_scores.detach());
    check_scores("generator_loss", own);
    check_scores("generator_loss", other);

    Tensor base;
    if (non_saturating) {
        base = neg(log(own));
    } else {
        Tensor one = Tensor::full(own.shape(), 1.0);
        base = log(sub(one, own));
    }
    switch (mode) {
        case GeneratorMode::vanilla: return mean(base);
        case GeneratorMode::competing: return mean(sub(base, hinge(sub(own, other))));
        case GeneratorMode::conceding: return mean(add(base, hinge(sub(own, other))));
    }
    throw DomainError("generator_loss: bad mode");
}

Tensor discriminator_loss(const Tensor& d_real, const std::vector<Tensor>& d_fakes) {
    Tensor real = clamp_scores(d_real);
    check_scores("discriminator_loss", real);
    Tensor acc = mean(log(real));
    for (const Tensor& f : d_fakes) {
        Tensor fake = clamp_scores(f);
        check_scores("discriminator_loss", fake);
        Tensor one = Tensor::full(fake.shape(), 1.0);
        acc = add(acc, mean(log(sub(one, fake))));
    }
    return neg(acc);
}

Tensor discriminator_loss(const ScoreBatch& scores) {
    return discriminator_loss(scores.d_real, {scores.d_g1, scores.d_g2});
}

}  // namespace mpmgan
