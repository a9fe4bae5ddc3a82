#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <vector>

#include "ctp/categorical.hpp"
#include "ctp/latent.hpp"
#include "ctp/synthdata.hpp"

namespace ctp {

// Sequence geometry a model predicts over. grid_cols maps a condition cell to
// its slot: slot = row * grid_cols + col. Square datasets use
// grid_cols = grid_size; rectangular shapes keep tiny verification instances
// (e.g. length 2) constructible.
struct ModelShape {
    std::size_t length = 0;
    std::size_t vocab = 0;
    std::size_t grid_cols = 0;

    static ModelShape from_meta(const DatasetMeta& meta) {
        return {meta.sequence_length(), meta.vocab(), meta.grid_size};
    }

    std::size_t slot_of(const Condition& cond) const { return cond.row * grid_cols + cond.col; }
};

// Contract: (state, optional condition) -> per-slot distribution over the
// fully unmasked sequence. Implementations must be pure; the samplers may
// issue the n+1 predict calls of one step concurrently.
class ConditionalTokenModel {
public:
    virtual ~ConditionalTokenModel() = default;

    virtual const ModelShape& shape() const = 0;

    // Unmasked slots return a point mass on their current token; masked slots
    // return the model's distribution.
    virtual std::vector<Categorical> predict(const LatentState& state,
                                             const std::optional<Condition>& cond) const = 0;
};

// Per-slot smoothed count tables: an unconditional table over all samples and
// one table per condition over the samples satisfying it. Probabilities are
// (count + alpha) / (total + vocab * alpha). Ignores unmasked context except
// for the point-mass rule, which makes composed distributions exactly
// computable by the brute-force oracle.
class TabularModel : public ConditionalTokenModel {
public:
    struct Table {
        // counts[slot * vocab + token]
        std::vector<double> counts;
        double total = 0.0;
    };

    TabularModel(ModelShape shape, double alpha, Table unconditional,
                 std::map<Condition, Table> conditional);

    const ModelShape& shape() const override { return shape_; }
    std::vector<Categorical> predict(const LatentState& state,
                                     const std::optional<Condition>& cond) const override;

    double alpha() const { return alpha_; }
    const Table& unconditional() const { return unconditional_; }
    const std::map<Condition, Table>& conditional() const { return conditional_; }

    // Smoothed distribution of one slot under the given table.
    Categorical slot_distribution(const Table& table, std::size_t slot) const;

private:
    ModelShape shape_;
    double alpha_ = 0.1;
    Table unconditional_;
    std::map<Condition, Table> conditional_;
};

TabularModel fit_tabular(const std::vector<Record>& records, const ModelShape& shape,
                         const std::vector<Condition>& conditions_index, double alpha);
TabularModel fit_tabular(const Dataset& dataset, const std::vector<Condition>& conditions_index,
                         double alpha = 0.1);

struct MlpConfig {
    std::size_t embed_dim = 16;
    std::size_t hidden_dim = 64;
    std::size_t steps = 20000;
    double learning_rate = 0.05;
    double dropout_p = 0.1; // probability of replacing the condition embedding with zeros
    std::uint64_t seed = 0;
};

struct TrainStats {
    std::size_t steps = 0;
    std::size_t null_condition_steps = 0;
    std::vector<double> losses; // one entry per step
};

// One hidden layer over the concatenated slot embeddings (mask token has its
// own embedding) and the condition embedding; tanh nonlinearity; linear
// length x vocab head. Null conditions use the zero vector, matching the
// train-time condition dropout.
class MlpModel : public ConditionalTokenModel {
public:
    MlpModel(ModelShape shape, MlpConfig config, Rng& rng); // random init

    const ModelShape& shape() const override { return shape_; }
    std::vector<Categorical> predict(const LatentState& state,
                                     const std::optional<Condition>& cond) const override;

    const MlpConfig& config() const { return config_; }
    std::vector<double>& parameters() { return params_; }
    const std::vector<double>& parameters() const { return params_; }

    // Mean cross-entropy of the target tokens at the masked slots of `state`.
    double example_loss(const LatentState& state, const std::vector<std::int32_t>& targets,
                        const std::optional<Condition>& cond) const;
    // Gradient of example_loss with respect to the flat parameter vector.
    std::vector<double> example_gradient(const LatentState& state,
                                         const std::vector<std::int32_t>& targets,
                                         const std::optional<Condition>& cond) const;

    // Parameter block layout in the flat vector, for serialization and tests.
    struct Layout {
        std::size_t token_embed, mask_embed, cond_embed, w1, b1, w2, b2, total;
    };
    Layout layout() const;

    static MlpModel from_parameters(ModelShape shape, MlpConfig config, std::vector<double> params);

private:
    MlpModel(ModelShape shape, MlpConfig config);
    std::size_t input_dim() const { return (shape_.length + 1) * config_.embed_dim; }
    std::size_t num_condition_slots() const { return shape_.length * /*colors*/ (shape_.vocab - 1); }
    std::size_t condition_index(const Condition& cond) const;
    // Forward pass; returns logits[slot * vocab + token], and the hidden/input
    // activations when requested by the backward pass.
    void forward(const LatentState& state, const std::optional<Condition>& cond,
                 std::vector<double>& logits, std::vector<double>* x_out,
                 std::vector<double>* h_out) const;

    ModelShape shape_;
    MlpConfig config_;
    std::vector<double> params_;
};

// Each step: sample a record, mask a uniformly random fraction of slots, pick
// one of the record's objects as the condition (zeroed with probability
// dropout_p), and take one SGD step on the masked-slot cross-entropy.
std::pair<MlpModel, TrainStats> train_mlp(const Dataset& dataset, const MlpConfig& config);

// Checkpoint file: {"version":1, "type":"tabular"|"mlp", "meta", "shapes",
// flat parameter arrays}. Loading rejects unknown versions.
void save_model(const TabularModel& model, const DatasetMeta& meta,
                const std::filesystem::path& path);
void save_model(const MlpModel& model, const DatasetMeta& meta,
                const std::filesystem::path& path);

struct LoadedModel {
    std::unique_ptr<ConditionalTokenModel> model;
    DatasetMeta meta;
    std::string type;
};

LoadedModel load_model(const std::filesystem::path& path);

} // namespace ctp
