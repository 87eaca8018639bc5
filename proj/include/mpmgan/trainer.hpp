#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <utility>
#include <vector>

#include "mpmgan/checkpoint.hpp"
#include "mpmgan/config.hpp"
#include "mpmgan/data.hpp"
#include "mpmgan/nn.hpp"
#include "mpmgan/objectives.hpp"

namespace mpmgan {

// Cross-iteration message storage. m1 is the message destined for G2's next
// input (produced on G1's side); m2 is destined for G1. produced_at == -1
// marks the noise-distribution initialization.
struct MessageBuffer {
    Tensor m1;
    Tensor m2;
    int64_t produced_at = -1;
};

// Snapshot of the previous iteration (all detached) from which the incoming
// messages can be re-produced on a live tape, giving the message networks a
// gradient path through the receiving generator's current loss.
struct PrevStep {
    Tensor gen1_out;
    Tensor gen2_out;
    Tensor z1;
    Tensor z2;
    Tensor m1_consumed;
    Tensor m2_consumed;
    bool valid = false;
};

// G1, G2, D plus the message generator and encoder. With shared_msg_gen (the
// default) both pipelines run through the same msg_gen/encoder instances, so
// parameter sharing holds by construction.
class AgentBundle {
  public:
    explicit AgentBundle(const TrainConfig& cfg);

    Mlp g1, g2, d, msg_gen, encoder;
    std::optional<Mlp> msg_gen2, encoder2;  // only with shared_msg_gen=false

    ObjectiveKind objective;
    NoiseSpec noise1, noise2;
    int msg_dim = 0;
    FlagsConfig flags;

    bool message_nets_shared() const { return !msg_gen2.has_value(); }
    const Mlp& msg_net(int producer) const;
    Mlp& msg_net(int producer);
    const Mlp& enc_net(int producer) const;
    Mlp& enc_net(int producer);
    int generator_input_dim() const;

  private:
    static int generator_input_dim_impl(const TrainConfig& cfg);
};

// mode none -> z unchanged; otherwise concat(z, incoming_msg) on the feature axis.
Tensor compose_generator_input(const Tensor& z, const Tensor& incoming_msg,
                               MessageMode mode);

Tensor generator_forward(const AgentBundle& bundle, int which, const Tensor& z,
                         const Tensor& incoming_msg);

// Next-iteration messages from this iteration's generations (values only,
// detached from any tape):
//   unconditioned: m1_next = msg(gen1_out), m2_next = msg(gen2_out)
//   conditioned:   m1_next = enc(concat(msg(gen1_out), z1, m_in2)),
//                  m2_next = enc(concat(msg(gen2_out), z2, m_in1))
// where m_in1/m_in2 are the messages the generators consumed this iteration.
std::pair<Tensor, Tensor> produce_messages(const AgentBundle& bundle,
                                           const Tensor& gen1_out, const Tensor& gen2_out,
                                           const Tensor& z1, const Tensor& z2,
                                           const Tensor& m_in1, const Tensor& m_in2);

// Re-produces the message consumed by `receiver` this iteration, on the active
// tape. Bitwise-equal to the buffered message as long as the message networks
// have not stepped since the buffer was produced.
Tensor rebuild_incoming_message(const AgentBundle& bundle, int receiver,
                                const PrevStep& prev);

struct StepMetrics {
    int64_t iter = 0;
    double loss_d = 0, loss_g1 = 0, loss_g2 = 0;
    double mean_d_real = 0, mean_d_g1 = 0, mean_d_g2 = 0;
    double hinge_g1 = 0, hinge_g2 = 0;
};

extern const char* const kMetricsCsvHeader;
std::string metrics_csv_row(const StepMetrics& m);

enum class TrainPhase { d_update, g1_update, g2_update, message_update, buffer_update };

// Per-iteration schedule: one D step, one step per enabled generator, one
// combined step for the message networks, then buffer production. The buffer
// crossing the iteration boundary is detached; message networks learn through
// the on-tape re-production of the incoming messages (disable with
// detach_messages).
class Trainer {
  public:
    struct Observer {
        virtual ~Observer() = default;
        virtual void after_phase(TrainPhase phase, const Trainer& trainer) = 0;
    };

    Trainer(const TrainConfig& cfg, const SyntheticDataset& dataset);
    Trainer(const Checkpoint& ck, const SyntheticDataset& dataset);

    Tensor sample_data_batch();
    StepMetrics step(const Tensor& data_batch);
    StepMetrics step() { return step(sample_data_batch()); }

    Checkpoint make_checkpoint() const;

    // Loss graphs as used by the update phases, built on the active tape;
    // exposed so gradient checks exercise the exact training path.
    Tensor generator_loss_graph(int which, const Tensor& z_own,
                                const Tensor& other_scores, Tensor* own_out = nullptr) const;
    Tensor discriminator_loss_graph(const Tensor& data_batch, const Tensor& gen1,
                                    const Tensor& gen2, Tensor* scores_out = nullptr) const;

    AgentBundle& bundle() { return bundle_; }
    const AgentBundle& bundle() const { return bundle_; }
    const MessageBuffer& buffer() const { return buffer_; }
    const PrevStep& prev() const { return prev_; }
    int64_t iteration() const { return iter_; }
    const TrainConfig& config() const { return cfg_; }
    void set_observer(Observer* obs) { observer_ = obs; }

  private:
    void notify(TrainPhase phase);
    bool live_message_path() const;

    TrainConfig cfg_;
    const SyntheticDataset* dataset_;
    AgentBundle bundle_;
    Adam opt_g1_, opt_g2_, opt_d_, opt_msg_, opt_enc_, opt_msg2_, opt_enc2_;
    MessageBuffer buffer_;
    PrevStep prev_;
    Rng data_rng_, noise1_rng_, noise2_rng_;
    int64_t iter_ = 0;
    Observer* observer_ = nullptr;
};

struct RunArtifacts {
    std::filesystem::path run_dir;
    std::vector<StepMetrics> metrics;
    std::vector<std::string> files;
};

// Full training run with persistence: config echo, per-iteration metrics CSV,
// periodic + final checkpoints, content-hash manifest. A numeric abort writes
// a diagnostic checkpoint and rethrows.
RunArtifacts train(const TrainConfig& cfg, const SyntheticDataset& dataset);

}  // namespace mpmgan
