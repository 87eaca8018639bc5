#include "mpmgan/trainer.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include <nlohmann/json.hpp>

#include "mpmgan/artifacts.hpp"
#include "mpmgan/errors.hpp"

namespace mpmgan {

namespace {

// Child-stream tags off the master seed; fixed so that runs are reproducible
// and the streams stay independent of call order.
constexpr uint64_t kTagInitG1 = 0x11;
constexpr uint64_t kTagInitG2 = 0x12;
constexpr uint64_t kTagInitD = 0x13;
constexpr uint64_t kTagInitMsg = 0x14;
constexpr uint64_t kTagInitEnc = 0x15;
constexpr uint64_t kTagInitMsg2 = 0x16;
constexpr uint64_t kTagInitEnc2 = 0x17;
constexpr uint64_t kTagNoise1 = 0x21;
constexpr uint64_t kTagNoise2 = 0x22;
constexpr uint64_t kTagData = 0xBA7C;
constexpr uint64_t kTagBufferInit = 0xB0F0;

double mean_of(const std::vector<double>& v) {
    double acc = 0.0;
    for (double x : v) acc += x;
    return acc / static_cast<double>(v.size());
}

double hinge_mean(const std::vector<double>& own, const std::vector<double>& other) {
    double acc = 0.0;
    for (size_t i = 0; i < own.size(); ++i) {
        acc += std::max(own[i] - other[i], 0.0);
    }
    return acc / static_cast<double>(own.size());
}

}  // namespace

// ---- AgentBundle -----------------------------------------------------------

AgentBundle::AgentBundle(const TrainConfig& cfg)
    : objective(cfg.objective), noise1(cfg.noise_spec(1)), noise2(cfg.noise_spec(2)),
      msg_dim(cfg.dims.msg_dim), flags(cfg.flags) {
    const Rng master(cfg.seed);
    const int h = cfg.dims.hidden;
    const int gen_in = generator_input_dim_impl(cfg);
    const int data_dim = cfg.dims.data_dim;
    const int enc_in = cfg.dims.msg_dim + cfg.dims.noise_dim + cfg.dims.msg_dim;

    const std::vector<Activation> gen_acts{Activation::leaky_relu, Activation::leaky_relu,
                                           Activation::identity};
    const std::vector<Activation> d_acts{Activation::leaky_relu, Activation::leaky_relu,
                                         Activation::sigmoid};
    const std::vector<Activation> msg_acts{Activation::leaky_relu, Activation::tanh};

    Rng r;
    r = master.child(kTagInitG1);
    g1 = Mlp("G1", {gen_in, h, h, data_dim}, gen_acts, r);
    r = master.child(kTagInitG2);
    g2 = Mlp("G2", {gen_in, h, h, data_dim}, gen_acts, r);
    r = master.child(kTagInitD);
    d = Mlp("D", {data_dim, h, h, 1}, d_acts, r);
    r = master.child(kTagInitMsg);
    msg_gen = Mlp("MsgGen", {data_dim, h, cfg.dims.msg_dim}, msg_acts, r);
    r = master.child(kTagInitEnc);
    encoder = Mlp("Enc", {enc_in, h, cfg.dims.msg_dim}, msg_acts, r);
    if (!cfg.flags.shared_msg_gen) {
        r = master.child(kTagInitMsg2);
        msg_gen2 = Mlp("MsgGen2", {data_dim, h, cfg.dims.msg_dim}, msg_acts, r);
        r = master.child(kTagInitEnc2);
        encoder2 = Mlp("Enc2", {enc_in, h, cfg.dims.msg_dim}, msg_acts, r);
    }
}

int AgentBundle::generator_input_dim_impl(const TrainConfig& cfg) {
    return cfg.dims.noise_dim +
           (cfg.objective.message_mode != MessageMode::none ? cfg.dims.msg_dim : 0);
}

int AgentBundle::generator_input_dim() const { return g1.in_dim(); }

const Mlp& AgentBundle::msg_net(int producer) const {
    return (producer == 2 && msg_gen2) ? *msg_gen2 : msg_gen;
}

Mlp& AgentBundle::msg_net(int producer) {
    return (producer == 2 && msg_gen2) ? *msg_gen2 : msg_gen;
}

const Mlp& AgentBundle::enc_net(int producer) const {
    return (producer == 2 && encoder2) ? *encoder2 : encoder;
}

Mlp& AgentBundle::enc_net(int producer) {
    return (producer == 2 && encoder2) ? *encoder2 : encoder;
}

// ---- message pipeline ------------------------------------------------------

Tensor compose_generator_input(const Tensor& z, const Tensor& incoming_msg,
                               MessageMode mode) {
    if (mode == MessageMode::none) return z;
    if (!incoming_msg.defined()) {
        throw ShapeError("compose_generator_input: message required but absent");
    }
    if (incoming_msg.shape()[0] != z.shape()[0]) {
        throw ShapeError("compose_generator_input: batch mismatch " +
                         shape_str(z.shape()) + " vs " + shape_str(incoming_msg.shape()));
    }
    return concat_last_axis({z, incoming_msg});
}

Tensor generator_forward(const AgentBundle& bundle, int which, const Tensor& z,
                         const Tensor& incoming_msg) {
    const Mlp& g = which == 1 ? bundle.g1 : bundle.g2;
    return g.forward(compose_generator_input(z, incoming_msg, bundle.objective.message_mode));
}

std::pair<Tensor, Tensor> produce_messages(const AgentBundle& bundle,
                                           const Tensor& gen1_out, const Tensor& gen2_out,
                                           const Tensor& z1, const Tensor& z2,
                                           const Tensor& m_in1, const Tensor& m_in2) {
    const MessageMode mode = bundle.objective.message_mode;
    if (mode == MessageMode::none) {
        throw DomainError("produce_messages: message_mode is none");
    }
    Tape::NoGrad ng;
    Tensor raw1 = bundle.msg_net(1).forward(gen1_out);
    Tensor raw2 = bundle.msg_net(2).forward(gen2_out);
    if (mode == MessageMode::message_passing) {
        return {raw1, raw2};
    }
    Tensor m1_next = bundle.enc_net(1).forward(concat_last_axis({raw1, z1, m_in2}));
    Tensor m2_next = bundle.enc_net(2).forward(concat_last_axis({raw2, z2, m_in1}));
    return {m1_next, m2_next};
}

Tensor rebuild_incoming_message(const AgentBundle& bundle, int receiver,
                                const PrevStep& prev) {
    const MessageMode mode = bundle.objective.message_mode;
    if (mode == MessageMode::none) {
        throw DomainError("rebuild_incoming_message: message_mode is none");
    }
    if (!prev.valid) {
        throw DomainError("rebuild_incoming_message: no previous iteration");
    }
    const int producer = receiver == 1 ? 2 : 1;
    const Tensor& gen_out = producer == 1 ? prev.gen1_out : prev.gen2_out;
    Tensor raw = bundle.msg_net(producer).forward(gen_out);
    if (mode == MessageMode::message_passing) return raw;
    const Tensor& z = producer == 1 ? prev.z1 : prev.z2;
    const Tensor& m_in = producer == 1 ? prev.m2_consumed : prev.m1_consumed;
    return bundle.enc_net(producer).forward(concat_last_axis({raw, z, m_in}));
}

// ---- metrics CSV -----------------------------------------------------------

const char* const kMetricsCsvHeader =
    "iter,loss_d,loss_g1,loss_g2,mean_d_real,mean_d_g1,mean_d_g2,hinge_g1,hinge_g2";

std::string metrics_csv_row(const StepMetrics& m) {
    char buf[256];
    std::snprintf(buf, sizeof(buf), "%lld,%.6g,%.6g,%.6g,%.6g,%.6g,%.6g,%.6g,%.6g",
                  static_cast<long long>(m.iter), m.loss_d, m.loss_g1, m.loss_g2,
                  m.mean_d_real, m.mean_d_g1, m.mean_d_g2, m.hinge_g1, m.hinge_g2);
    return buf;
}

// ---- Trainer ---------------------------------------------------------------

Trainer::Trainer(const TrainConfig& cfg, const SyntheticDataset& dataset)
    : cfg_(cfg), dataset_(&dataset), bundle_(cfg),
      opt_g1_(cfg.optimizer, bundle_.g1.params()),
      opt_g2_(cfg.optimizer, bundle_.g2.params()),
      opt_d_(cfg.optimizer, bundle_.d.params()),
      opt_msg_(cfg.optimizer, bundle_.msg_gen.params()),
      opt_enc_(cfg.optimizer, bundle_.encoder.params()),
      data_rng_(Rng(cfg.seed).child(kTagData)),
      noise1_rng_(Rng(cfg.seed).child(kTagNoise1)),
      noise2_rng_(Rng(cfg.seed).child(kTagNoise2)) {
    if (dataset.samples.shape()[1] != cfg.dims.data_dim) {
        throw ConfigError("dataset dimensionality does not match data_dim");
    }
    if (!bundle_.message_nets_shared()) {
        opt_msg2_ = Adam(cfg.optimizer, bundle_.msg_gen2->params());
        opt_enc2_ = Adam(cfg.optimizer, bundle_.encoder2->params());
    }
    // Message buffers start from the noise distributions (m1 from noise2's,
    // m2 from noise1's), resized to msg_dim.
    Rng buf_rng = Rng(cfg.seed).child(kTagBufferInit);
    const NoiseSpec m1_spec{cfg.noise2, cfg.dims.msg_dim};
    const NoiseSpec m2_spec{cfg.noise1, cfg.dims.msg_dim};
    buffer_.m1 = sample_noise(m1_spec, cfg.batch, buf_rng);
    buffer_.m2 = sample_noise(m2_spec, cfg.batch, buf_rng);
    buffer_.produced_at = -1;
}

Tensor Trainer::sample_data_batch() {
    const int n = dataset_->n();
    const int dim = dataset_->samples.shape()[1];
    const auto& src = dataset_->samples.values();
    std::vector<double> out(static_cast<size_t>(cfg_.batch) * dim);
    for (int i = 0; i < cfg_.batch; ++i) {
        int idx = static_cast<int>(data_rng_.next_unit() * n);
        if (idx >= n) idx = n - 1;
        std::copy(src.begin() + static_cast<size_t>(idx) * dim,
                  src.begin() + static_cast<size_t>(idx + 1) * dim,
                  out.begin() + static_cast<size_t>(i) * dim);
    }
    return Tensor::from_values({cfg_.batch, dim}, std::move(out));
}

bool Trainer::live_message_path() const {
    return bundle_.objective.message_mode != MessageMode::none &&
           !bundle_.flags.detach_messages && prev_.valid;
}

Tensor Trainer::generator_loss_graph(int which, const Tensor& z_own,
                                     const Tensor& other_scores, Tensor* own_out) const {
    Tensor m_in;
    if (bundle_.objective.message_mode != MessageMode::none) {
        if (live_message_path()) {
            m_in = rebuild_incoming_message(bundle_, which, prev_);
        } else {
            m_in = which == 1 ? buffer_.m2 : buffer_.m1;
        }
    }
    Tensor gen = generator_forward(bundle_, which, z_own, m_in);
    Tensor own = bundle_.d.forward(gen);
    if (!gen.all_finite() || !own.all_finite()) {
        throw NumericAbort("non-finite generator " + std::to_string(which) +
                           " pipeline at iteration " + std::to_string(iter_));
    }
    if (own_out) *own_out = own;
    return generator_loss(own, other_scores, bundle_.objective.generator_mode,
                          bundle_.flags.non_saturating);
}

Tensor Trainer::discriminator_loss_graph(const Tensor& data_batch, const Tensor& gen1,
                                         const Tensor& gen2, Tensor* scores_out) const {
    Tensor s_real = bundle_.d.forward(data_batch);
    Tensor s1 = bundle_.d.forward(gen1);
    Tensor s2 = bundle_.d.forward(gen2);
    if (!s_real.all_finite() || !s1.all_finite() || !s2.all_finite()) {
        throw NumericAbort("non-finite discriminator scores at iteration " +
                           std::to_string(iter_));
    }
    if (scores_out) {
        scores_out[0] = s_real;
        scores_out[1] = s1;
        scores_out[2] = s2;
    }
    std::vector<Tensor> fakes;
    if (bundle_.flags.train_g1) fakes.push_back(s1);
    if (bundle_.flags.train_g2) fakes.push_back(s2);
    return discriminator_loss(s_real, fakes);
}

void Trainer::notify(TrainPhase phase) {
    if (observer_) observer_->after_phase(phase, *this);
}

StepMetrics Trainer::step(const Tensor& data_batch) {
    const int64_t t = iter_;
    const MessageMode mm = bundle_.objective.message_mode;
    const bool use_msgs = mm != MessageMode::none;

    if (data_batch.shape().size() != 2 || data_batch.shape()[0] != cfg_.batch ||
        data_batch.shape()[1] != cfg_.dims.data_dim) {
        throw ShapeError("train_step: data batch " + shape_str(data_batch.shape()) +
                         " does not match [batch x data_dim]");
    }
    // Buffer causality: messages consumed now were produced last iteration
    // (or at initialization for the first one).
    if (use_msgs && buffer_.produced_at != t - 1 &&
        !(t == 0 && buffer_.produced_at == -1)) {
        throw DomainError("train_step: message buffer produced at iteration " +
                          std::to_string(buffer_.produced_at) + ", consumed at " +
                          std::to_string(t));
    }

    StepMetrics mets;
    mets.iter = t;

    // (1) fresh noise; (2)-(3) generations with the buffered messages, detached.
    Tensor z1 = sample_noise(bundle_.noise1, cfg_.batch, noise1_rng_);
    Tensor z2 = sample_noise(bundle_.noise2, cfg_.batch, noise2_rng_);
    Tensor gen1_c, gen2_c;
    {
        Tape::NoGrad ng;
        gen1_c = generator_forward(bundle_, 1, z1, use_msgs ? buffer_.m2 : Tensor());
        gen2_c = generator_forward(bundle_, 2, z2, use_msgs ? buffer_.m1 : Tensor());
    }
    if (!gen1_c.all_finite() || !gen2_c.all_finite()) {
        throw NumericAbort("non-finite generator output at iteration " + std::to_string(t));
    }

    // (4) discriminator update; disabled generators are excluded from the loss.
    {
        Tape tape;
        Tape::Scope scope(tape);
        zero_grads(bundle_.d.params());
        Tensor scores[3];
        Tensor d_loss = discriminator_loss_graph(data_batch, gen1_c, gen2_c, scores);
        tape.backward(d_loss);
        opt_d_.step(bundle_.d.params());
        mets.loss_d = d_loss.item();
        mets.mean_d_real = mean_of(scores[0].values());
        mets.mean_d_g1 = mean_of(scores[1].values());
        mets.mean_d_g2 = mean_of(scores[2].values());
    }
    notify(TrainPhase::d_update);

    // Counterpart scores for the hinge terms: post-update D applied to the
    // iteration-start generations, held constant.
    Tensor other_for_g1, other_for_g2;
    {
        Tape::NoGrad ng;
        other_for_g1 = bundle_.d.forward(gen2_c);
        other_for_g2 = bundle_.d.forward(gen1_c);
    }
    if (!other_for_g1.all_finite() || !other_for_g2.all_finite()) {
        throw NumericAbort("non-finite counterpart scores at iteration " +
                           std::to_string(t));
    }

    const bool live = live_message_path();
    if (live) {
        zero_grads(bundle_.msg_net(1).params());
        zero_grads(bundle_.msg_net(2).params());
        if (mm == MessageMode::conditioned_message_passing) {
            zero_grads(bundle_.enc_net(1).params());
            zero_grads(bundle_.enc_net(2).params());
        }
    }

    // (5)(6) generator updates with fresh D scores.
    for (int which = 1; which <= 2; ++which) {
        const bool enabled = which == 1 ? bundle_.flags.train_g1 : bundle_.flags.train_g2;
        const Tensor& z_own = which == 1 ? z1 : z2;
        const Tensor& other = which == 1 ? other_for_g1 : other_for_g2;
        double loss_val = 0.0, hinge_val = 0.0;
        if (enabled) {
            Tape tape;
            Tape::Scope scope(tape);
            Mlp& g = which == 1 ? bundle_.g1 : bundle_.g2;
            zero_grads(g.params());
            Tensor own;
            Tensor loss = generator_loss_graph(which, z_own, other, &own);
            tape.backward(loss);
            (which == 1 ? opt_g1_ : opt_g2_).step(g.params());
            loss_val = loss.item();
            hinge_val = hinge_mean(own.values(), other.values());
        } else {
            Tape::NoGrad ng;
            Tensor own;
            Tensor loss = generator_loss_graph(which, z_own, other, &own);
            loss_val = loss.item();
            hinge_val = hinge_mean(own.values(), other.values());
        }
        if (which == 1) {
            mets.loss_g1 = loss_val;
            mets.hinge_g1 = hinge_val;
            notify(TrainPhase::g1_update);
        } else {
            mets.loss_g2 = loss_val;
            mets.hinge_g2 = hinge_val;
            notify(TrainPhase::g2_update);
        }
    }

    // One combined step for the message networks, fed by whichever generator
    // losses back-propagated through the rebuilt incoming messages.
    if (live && (bundle_.flags.train_g1 || bundle_.flags.train_g2)) {
        if (bundle_.message_nets_shared()) {
            opt_msg_.step(bundle_.msg_gen.params());
            if (mm == MessageMode::conditioned_message_passing) {
                opt_enc_.step(bundle_.encoder.params());
            }
        } else {
            // Receiver 1's path runs through producer 2's nets and vice versa.
            if (bundle_.flags.train_g1) {
                opt_msg2_.step(bundle_.msg_gen2->params());
                if (mm == MessageMode::conditioned_message_passing) {
                    opt_enc2_.step(bundle_.encoder2->params());
                }
            }
            if (bundle_.flags.train_g2) {
                opt_msg_.step(bundle_.msg_gen.params());
                if (mm == MessageMode::conditioned_message_passing) {
                    opt_enc_.step(bundle_.encoder.params());
                }
            }
        }
    }
    notify(TrainPhase::message_update);

    // (7) next buffer from this iteration's generations; the buffer tensors
    // cross the iteration boundary detached.
    if (use_msgs) {
        auto [m1_next, m2_next] =
            produce_messages(bundle_, gen1_c, gen2_c, z1, z2, buffer_.m1, buffer_.m2);
        prev_ = PrevStep{gen1_c, gen2_c, z1, z2, buffer_.m1, buffer_.m2, true};
        buffer_ = MessageBuffer{m1_next, m2_next, t};
    }
    notify(TrainPhase::buffer_update);

    iter_ = t + 1;
    for (double v : {mets.loss_d, mets.loss_g1, mets.loss_g2, mets.mean_d_real,
                     mets.mean_d_g1, mets.mean_d_g2, mets.hinge_g1, mets.hinge_g2}) {
        if (!std::isfinite(v)) {
            throw NumericAbort("non-finite loss at iteration " + std::to_string(t));
        }
    }
    return mets;
}

// ---- checkpointing ---------------------------------------------------------

namespace {

void push_net_arrays(std::vector<NamedArray>& arrays, const std::string& prefix,
                     const Mlp& net) {
    const auto& layers = net.layers();
    for (size_t l = 0; l < layers.size(); ++l) {
        arrays.push_back({prefix + "." + std::to_string(l) + ".weight",
                          layers[l].weight.shape(), layers[l].weight.values()});
        arrays.push_back({prefix + "." + std::to_string(l) + ".bias",
                          layers[l].bias.shape(), layers[l].bias.values()});
    }
}

void push_adam_arrays(std::vector<NamedArray>& arrays, const std::string& prefix,
                      const Mlp& net, const Adam& opt) {
    const auto params = net.params();
    const auto& m = opt.first_moments();
    const auto& v = opt.second_moments();
    for (size_t i = 0; i < params.size(); ++i) {
        const size_t layer = i / 2;
        const char* kind = (i % 2 == 0) ? "weight" : "bias";
        const std::string base =
            "adam." + prefix + "." + std::to_string(layer) + "." + kind;
        arrays.push_back({base + ".m", params[i].shape(), m[i]});
        arrays.push_back({base + ".v", params[i].shape(), v[i]});
    }
}

void load_net_arrays(const Checkpoint& ck, const std::string& prefix, Mlp& net) {
    auto& layers = net.layers();
    for (size_t l = 0; l < layers.size(); ++l) {
        const NamedArray& w = ck.require(prefix + "." + std::to_string(l) + ".weight");
        const NamedArray& b = ck.require(prefix + "." + std::to_string(l) + ".bias");
        if (w.shape != layers[l].weight.shape() || b.shape != layers[l].bias.shape()) {
            throw DomainError("checkpoint: shape mismatch for " + prefix + " layer " +
                              std::to_string(l));
        }
        layers[l].weight.values() = w.values;
        layers[l].bias.values() = b.values;
    }
}

void load_adam_arrays(const Checkpoint& ck, const std::string& prefix, const Mlp& net,
                      Adam& opt) {
    const auto params = net.params();
    std::vector<std::vector<double>> m, v;
    for (size_t i = 0; i < params.size(); ++i) {
        const size_t layer = i / 2;
        const char* kind = (i % 2 == 0) ? "weight" : "bias";
        const std::string base =
            "adam." + prefix + "." + std::to_string(layer) + "." + kind;
        m.push_back(ck.require(base + ".m").values);
        v.push_back(ck.require(base + ".v").values);
    }
    auto it = ck.adam_steps.find(prefix);
    if (it == ck.adam_steps.end()) {
        throw DomainError("checkpoint: missing adam step count for " + prefix);
    }
    opt.restore(it->second, std::move(m), std::move(v));
}

NamedArray tensor_array(const std::string& name, const Tensor& t) {
    return {name, t.shape(), t.values()};
}

Tensor array_tensor(const NamedArray& a) {
    return Tensor::from_values(a.shape, a.values);
}

}  // namespace

Checkpoint Trainer::make_checkpoint() const {
    Checkpoint ck;
    ck.config = cfg_;
    ck.iteration = iter_;
    ck.rng_data = data_rng_.state;
    ck.rng_noise1 = noise1_rng_.state;
    ck.rng_noise2 = noise2_rng_.state;
    ck.buffer_produced_at = buffer_.produced_at;
    ck.has_prev = prev_.valid;
    ck.adam_steps["g1"] = opt_g1_.step_count();
    ck.adam_steps["g2"] = opt_g2_.step_count();
    ck.adam_steps["d"] = opt_d_.step_count();
    ck.adam_steps["msg"] = opt_msg_.step_count();
    ck.adam_steps["enc"] = opt_enc_.step_count();

    push_net_arrays(ck.arrays, "g1", bundle_.g1);
    push_net_arrays(ck.arrays, "g2", bundle_.g2);
    push_net_arrays(ck.arrays, "d", bundle_.d);
    push_net_arrays(ck.arrays, "msg", bundle_.msg_gen);
    push_net_arrays(ck.arrays, "enc", bundle_.encoder);
    push_adam_arrays(ck.arrays, "g1", bundle_.g1, opt_g1_);
    push_adam_arrays(ck.arrays, "g2", bundle_.g2, opt_g2_);
    push_adam_arrays(ck.arrays, "d", bundle_.d, opt_d_);
    push_adam_arrays(ck.arrays, "msg", bundle_.msg_gen, opt_msg_);
    push_adam_arrays(ck.arrays, "enc", bundle_.encoder, opt_enc_);
    if (!bundle_.message_nets_shared()) {
        ck.adam_steps["msg2"] = opt_msg2_.step_count();
        ck.adam_steps["enc2"] = opt_enc2_.step_count();
        push_net_arrays(ck.arrays, "msg2", *bundle_.msg_gen2);
        push_net_arrays(ck.arrays, "enc2", *bundle_.encoder2);
        push_adam_arrays(ck.arrays, "msg2", *bundle_.msg_gen2, opt_msg2_);
        push_adam_arrays(ck.arrays, "enc2", *bundle_.encoder2, opt_enc2_);
    }
    ck.arrays.push_back(tensor_array("buffer.m1", buffer_.m1));
    ck.arrays.push_back(tensor_array("buffer.m2", buffer_.m2));
    if (prev_.valid) {
        ck.arrays.push_back(tensor_array("prev.gen1_out", prev_.gen1_out));
        ck.arrays.push_back(tensor_array("prev.gen2_out", prev_.gen2_out));
        ck.arrays.push_back(tensor_array("prev.z1", prev_.z1));
        ck.arrays.push_back(tensor_array("prev.z2", prev_.z2));
        ck.arrays.push_back(tensor_array("prev.m1_consumed", prev_.m1_consumed));
        ck.arrays.push_back(tensor_array("prev.m2_consumed", prev_.m2_consumed));
    }
    return ck;
}

Trainer::Trainer(const Checkpoint& ck, const SyntheticDataset& dataset)
    : Trainer(ck.config, dataset) {
    load_net_arrays(ck, "g1", bundle_.g1);
    load_net_arrays(ck, "g2", bundle_.g2);
    load_net_arrays(ck, "d", bundle_.d);
    load_net_arrays(ck, "msg", bundle_.msg_gen);
    load_net_arrays(ck, "enc", bundle_.encoder);
    load_adam_arrays(ck, "g1", bundle_.g1, opt_g1_);
    load_adam_arrays(ck, "g2", bundle_.g2, opt_g2_);
    load_adam_arrays(ck, "d", bundle_.d, opt_d_);
    load_adam_arrays(ck, "msg", bundle_.msg_gen, opt_msg_);
    load_adam_arrays(ck, "enc", bundle_.encoder, opt_enc_);
    if (!bundle_.message_nets_shared()) {
        load_net_arrays(ck, "msg2", *bundle_.msg_gen2);
        load_net_arrays(ck, "enc2", *bundle_.encoder2);
        load_adam_arrays(ck, "msg2", *bundle_.msg_gen2, opt_msg2_);
        load_adam_arrays(ck, "enc2", *bundle_.encoder2, opt_enc2_);
    }
    buffer_.m1 = array_tensor(ck.require("buffer.m1"));
    buffer_.m2 = array_tensor(ck.require("buffer.m2"));
    buffer_.produced_at = ck.buffer_produced_at;
    if (ck.has_prev) {
        prev_.gen1_out = array_tensor(ck.require("prev.gen1_out"));
        prev_.gen2_out = array_tensor(ck.require("prev.gen2_out"));
        prev_.z1 = array_tensor(ck.require("prev.z1"));
        prev_.z2 = array_tensor(ck.require("prev.z2"));
        prev_.m1_consumed = array_tensor(ck.require("prev.m1_consumed"));
        prev_.m2_consumed = array_tensor(ck.require("prev.m2_consumed"));
        prev_.valid = true;
    }
    data_rng_.state = ck.rng_data;
    noise1_rng_.state = ck.rng_noise1;
    noise2_rng_.state = ck.rng_noise2;
    iter_ = ck.iteration;
}

// ---- full run --------------------------------------------------------------

namespace {

std::string ckpt_name(int64_t iter) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "ckpt_%07lld.mpck", static_cast<long long>(iter));
    return buf;
}

}  // namespace

RunArtifacts train(const TrainConfig& cfg, const SyntheticDataset& dataset) {
    namespace fs = std::filesystem;
    RunArtifacts artifacts;
    artifacts.run_dir = fs::path(cfg.output_dir);
    fs::create_directories(artifacts.run_dir);

    {
        std::ofstream echo(artifacts.run_dir / "config_echo.json");
        if (!echo) throw IoError("cannot write config echo in " + cfg.output_dir);
        echo << config_to_json(cfg).dump(2) << "\n";
    }
    artifacts.files.push_back("config_echo.json");

    std::ofstream csv(artifacts.run_dir / "metrics.csv", std::ios::binary);
    if (!csv) throw IoError("cannot write metrics.csv in " + cfg.output_dir);
    csv << kMetricsCsvHeader << "\n";
    artifacts.files.push_back("metrics.csv");

    Trainer trainer(cfg, dataset);
    try {
        for (int64_t t = 0; t < cfg.n_iters; ++t) {
            StepMetrics m = trainer.step();
            artifacts.metrics.push_back(m);
            csv << metrics_csv_row(m) << "\n";
            if ((t + 1) % cfg.checkpoint_interval == 0 && t + 1 != cfg.n_iters) {
                const std::string name = ckpt_name(t + 1);
                save_checkpoint(trainer.make_checkpoint(), artifacts.run_dir / name);
                artifacts.files.push_back(name);
            }
        }
    } catch (const NumericAbort&) {
        csv.flush();
        save_checkpoint(trainer.make_checkpoint(), artifacts.run_dir / "ckpt_diag.mpck");
        write_run_manifest(artifacts.run_dir);
        throw;
    }
    csv.flush();
    save_checkpoint(trainer.make_checkpoint(), artifacts.run_dir / "ckpt_final.mpck");
    artifacts.files.push_back("ckpt_final.mpck");
    write_run_manifest(artifacts.run_dir);
    artifacts.files.push_back("manifest.json");
    return artifacts;
}

}  // namespace mpmgan
