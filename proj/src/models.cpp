#include "ctp/models.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <json.hpp>

#include "meta_json.hpp"

namespace ctp {

// ---------------------------------------------------------------------------
// TabularModel

TabularModel::TabularModel(ModelShape shape, double alpha, Table unconditional,
                           std::map<Condition, Table> conditional)
    : shape_(shape), alpha_(alpha), unconditional_(std::move(unconditional)),
      conditional_(std::move(conditional)) {
    const std::size_t expected = shape_.length * shape_.vocab;
    if (unconditional_.counts.size() != expected) {
        throw DimensionMismatch("unconditional table size mismatch");
    }
    for (const auto& [cond, table] : conditional_) {
        if (table.counts.size() != expected) {
            throw DimensionMismatch("conditional table size mismatch");
        }
        if (table.total <= 0.0 && alpha_ == 0.0) {
            throw UndefinedDistribution("condition has no matching samples and alpha is zero");
        }
    }
}

Categorical TabularModel::slot_distribution(const Table& table, std::size_t slot) const {
    const std::size_t k = shape_.vocab;
    std::vector<double> probs(k);
    const double denom = table.total + alpha_ * static_cast<double>(k);
    if (denom <= 0.0) throw UndefinedDistribution("empty table with alpha = 0");
    for (std::size_t t = 0; t < k; ++t) {
        probs[t] = (table.counts[slot * k + t] + alpha_) / denom;
    }
    return Categorical::from_probs(probs);
}

std::vector<Categorical> TabularModel::predict(const LatentState& state,
                                               const std::optional<Condition>& cond) const {
    if (state.size() != shape_.length) throw ShapeError("state length mismatch");
    const Table* table = &unconditional_;
    if (cond.has_value()) {
        const auto it = conditional_.find(*cond);
        if (it == conditional_.end()) throw Error("condition not in model index");
        table = &it->second;
    }
    std::vector<Categorical> out;
    out.reserve(shape_.length);
    for (std::size_t slot = 0; slot < shape_.length; ++slot) {
        if (state.is_masked(slot)) {
            out.push_back(slot_distribution(*table, slot));
        } else {
            out.push_back(Categorical::point_mass(shape_.vocab,
                                                  static_cast<std::size_t>(state.token(slot))));
        }
    }
    return out;
}

TabularModel fit_tabular(const std::vector<Record>& records, const ModelShape& shape,
                         const std::vector<Condition>& conditions_index, double alpha) {
    if (records.empty()) throw InsufficientData("empty dataset");
    if (alpha < 0.0) throw Error("alpha must be >= 0");
    const std::size_t k = shape.vocab;
    TabularModel::Table uncond;
    uncond.counts.assign(shape.length * k, 0.0);
    std::map<Condition, TabularModel::Table> cond_tables;
    for (const Condition& c : conditions_index) {
        if (c.color_id + 1 >= shape.vocab || shape.slot_of(c) >= shape.length) {
            throw DimensionMismatch("condition outside model shape");
        }
        cond_tables[c].counts.assign(shape.length * k, 0.0);
    }

    LatentState state;
    for (const Record& rec : records) {
        if (rec.tokens.size() != shape.length) throw ShapeError("record length mismatch");
        for (std::size_t slot = 0; slot < shape.length; ++slot) {
            const std::int32_t tok = rec.tokens[slot];
            if (tok < 0 || static_cast<std::size_t>(tok) >= k) {
                throw ShapeError("record token out of range");
            }
            uncond.counts[slot * k + static_cast<std::size_t>(tok)] += 1.0;
        }
        uncond.total += 1.0;
        state.slots = rec.tokens;
        for (auto& [c, table] : cond_tables) {
            if (!check_condition(state, c, shape.grid_cols)) continue;
            for (std::size_t slot = 0; slot < shape.length; ++slot) {
                table.counts[slot * k + static_cast<std::size_t>(rec.tokens[slot])] += 1.0;
            }
            table.total += 1.0;
        }
    }
    return TabularModel(shape, alpha, std::move(uncond), std::move(cond_tables));
}

TabularModel fit_tabular(const Dataset& dataset, const std::vector<Condition>& conditions_index,
                         double alpha) {
    return fit_tabular(dataset.records, ModelShape::from_meta(dataset.meta), conditions_index,
                       alpha);
}

// ---------------------------------------------------------------------------
// MlpModel

MlpModel::MlpModel(ModelShape shape, MlpConfig config)
    : shape_(shape), config_(config) {
    if (shape_.vocab < 2) throw DimensionMismatch("vocab must include at least one color token");
    params_.assign(layout().total, 0.0);
}

MlpModel::MlpModel(ModelShape shape, MlpConfig config, Rng& rng)
    : MlpModel(shape, config) {
    const Layout lay = layout();
    auto fill = [&rng, this](std::size_t begin, std::size_t end, double r) {
        for (std::size_t i = begin; i < end; ++i) {
            params_[i] = (canonical(rng) * 2.0 - 1.0) * r;
        }
    };
    const double r_embed = 1.0 / std::sqrt(static_cast<double>(config_.embed_dim));
    const double r_w1 = 1.0 / std::sqrt(static_cast<double>(input_dim()));
    const double r_w2 = 1.0 / std::sqrt(static_cast<double>(config_.hidden_dim));
    fill(lay.token_embed, lay.w1, r_embed);
    fill(lay.w1, lay.w2, r_w1);
    fill(lay.w2, lay.total, r_w2);
}

MlpModel::Layout MlpModel::layout() const {
    const std::size_t de = config_.embed_dim;
    const std::size_t dh = config_.hidden_dim;
    const std::size_t lk = shape_.length * shape_.vocab;
    Layout lay{};
    lay.token_embed = 0;
    lay.mask_embed = lay.token_embed + shape_.vocab * de;
    lay.cond_embed = lay.mask_embed + de;
    lay.w1 = lay.cond_embed + num_condition_slots() * de;
    lay.b1 = lay.w1 + dh * input_dim();
    lay.w2 = lay.b1 + dh;
    lay.b2 = lay.w2 + lk * dh;
    lay.total = lay.b2 + lk;
    return lay;
}

std::size_t MlpModel::condition_index(const Condition& cond) const {
    const std::size_t slot = shape_.slot_of(cond);
    const std::size_t colors = shape_.vocab - 1;
    if (slot >= shape_.length || cond.color_id >= colors) {
        throw ShapeError("condition outside model shape");
    }
    return slot * colors + cond.color_id;
}

void MlpModel::forward(const LatentState& state, const std::optional<Condition>& cond,
                       std::vector<double>& logits, std::vector<double>* x_out,
                       std::vector<double>* h_out) const {
    if (state.size() != shape_.length) throw ShapeError("state length mismatch");
    const Layout lay = layout();
    const std::size_t de = config_.embed_dim;
    const std::size_t dh = config_.hidden_dim;
    const std::size_t din = input_dim();
    const std::size_t lk = shape_.length * shape_.vocab;

    std::vector<double> x(din, 0.0);
    for (std::size_t slot = 0; slot < shape_.length; ++slot) {
        std::size_t src;
        if (state.is_masked(slot)) {
            src = lay.mask_embed;
        } else {
            const auto tok = static_cast<std::size_t>(state.token(slot));
            if (tok >= shape_.vocab) throw ShapeError("token out of range");
            src = lay.token_embed + tok * de;
        }
        std::copy_n(params_.begin() + static_cast<std::ptrdiff_t>(src), de,
                    x.begin() + static_cast<std::ptrdiff_t>(slot * de));
    }
    if (cond.has_value()) {
        const std::size_t src = lay.cond_embed + condition_index(*cond) * de;
        std::copy_n(params_.begin() + static_cast<std::ptrdiff_t>(src), de,
                    x.begin() + static_cast<std::ptrdiff_t>(shape_.length * de));
    }

    std::vector<double> h(dh);
    for (std::size_t j = 0; j < dh; ++j) {
        double acc = params_[lay.b1 + j];
        const double* w = &params_[lay.w1 + j * din];
        for (std::size_t i = 0; i < din; ++i) acc += w[i] * x[i];
        h[j] = std::tanh(acc);
    }

    logits.assign(lk, 0.0);
    for (std::size_t o = 0; o < lk; ++o) {
        double acc = params_[lay.b2 + o];
        const double* w = &params_[lay.w2 + o * dh];
        for (std::size_t j = 0; j < dh; ++j) acc += w[j] * h[j];
        logits[o] = acc;
    }

    if (x_out) *x_out = std::move(x);
    if (h_out) *h_out = std::move(h);
}

std::vector<Categorical> MlpModel::predict(const LatentState& state,
                                           const std::optional<Condition>& cond) const {
    std::vector<double> logits;
    forward(state, cond, logits, nullptr, nullptr);
    std::vector<Categorical> out;
    out.reserve(shape_.length);
    for (std::size_t slot = 0; slot < shape_.length; ++slot) {
        if (state.is_masked(slot)) {
            out.push_back(normalize(std::span<const double>(logits).subspan(slot * shape_.vocab,
                                                                            shape_.vocab)));
        } else {
            out.push_back(Categorical::point_mass(shape_.vocab,
                                                  static_cast<std::size_t>(state.token(slot))));
        }
    }
    return out;
}

double MlpModel::example_loss(const LatentState& state, const std::vector<std::int32_t>& targets,
                              const std::optional<Condition>& cond) const {
    if (targets.size() != shape_.length) throw ShapeError("target length mismatch");
    std::vector<double> logits;
    forward(state, cond, logits, nullptr, nullptr);
    double loss = 0.0;
    std::size_t masked = 0;
    for (std::size_t slot = 0; slot < shape_.length; ++slot) {
        if (!state.is_masked(slot)) continue;
        const auto row = std::span<const double>(logits).subspan(slot * shape_.vocab, shape_.vocab);
        const double lse = logsumexp(row);
        loss += lse - row[static_cast<std::size_t>(targets[slot])];
        ++masked;
    }
    return masked == 0 ? 0.0 : loss / static_cast<double>(masked);
}

std::vector<double> MlpModel::example_gradient(const LatentState& state,
                                               const std::vector<std::int32_t>& targets,
                                               const std::optional<Condition>& cond) const {
    if (targets.size() != shape_.length) throw ShapeError("target length mismatch");
    const Layout lay = layout();
    const std::size_t de = config_.embed_dim;
    const std::size_t dh = config_.hidden_dim;
    const std::size_t din = input_dim();
    const std::size_t lk = shape_.length * shape_.vocab;

    std::vector<double> logits, x, h;
    forward(state, cond, logits, &x, &h);

    std::vector<double> grad(params_.size(), 0.0);
    const std::size_t masked = state.masked_count();
    if (masked == 0) return grad;
    const double inv_m = 1.0 / static_cast<double>(masked);

    // d loss / d logits
    std::vector<double> dlogits(lk, 0.0);
    for (std::size_t slot = 0; slot < shape_.length; ++slot) {
        if (!state.is_masked(slot)) continue;
        const auto row = std::span<const double>(logits).subspan(slot * shape_.vocab, shape_.vocab);
        const double lse = logsumexp(row);
        for (std::size_t t = 0; t < shape_.vocab; ++t) {
            double g = std::exp(row[t] - lse);
            if (t == static_cast<std::size_t>(targets[slot])) g -= 1.0;
            dlogits[slot * shape_.vocab + t] = g * inv_m;
        }
    }

    // output layer
    std::vector<double> dh_vec(dh, 0.0);
    for (std::size_t o = 0; o < lk; ++o) {
        const double g = dlogits[o];
        if (g == 0.0) continue;
        grad[lay.b2 + o] += g;
        double* dw = &grad[lay.w2 + o * dh];
        const double* w = &params_[lay.w2 + o * dh];
        for (std::size_t j = 0; j < dh; ++j) {
            dw[j] += g * h[j];
            dh_vec[j] += g * w[j];
        }
    }

    // hidden layer
    std::vector<double> dx(din, 0.0);
    for (std::size_t j = 0; j < dh; ++j) {
        const double dpre = dh_vec[j] * (1.0 - h[j] * h[j]);
        if (dpre == 0.0) continue;
        grad[lay.b1 + j] += dpre;
        double* dw = &grad[lay.w1 + j * din];
        const double* w = &params_[lay.w1 + j * din];
        for (std::size_t i = 0; i < din; ++i) {
            dw[i] += dpre * x[i];
            dx[i] += dpre * w[i];
        }
    }

    // scatter into embeddings
    for (std::size_t slot = 0; slot < shape_.length; ++slot) {
        std::size_t dst;
        if (state.is_masked(slot)) {
            dst = lay.mask_embed;
        } else {
            dst = lay.token_embed + static_cast<std::size_t>(state.token(slot)) * de;
        }
        for (std::size_t e = 0; e < de; ++e) grad[dst + e] += dx[slot * de + e];
    }
    if (cond.has_value()) {
        const std::size_t dst = lay.cond_embed + condition_index(*cond) * de;
        for (std::size_t e = 0; e < de; ++e) grad[dst + e] += dx[shape_.length * de + e];
    }
    return grad;
}

MlpModel MlpModel::from_parameters(ModelShape shape, MlpConfig config,
                                   std::vector<double> params) {
    MlpModel model(shape, config);
    if (params.size() != model.layout().total) {
        throw DimensionMismatch("parameter vector size mismatch");
    }
    for (double p : params) {
        if (!std::isfinite(p)) throw FormatError("non-finite model parameter");
    }
    model.params_ = std::move(params);
    return model;
}

std::pair<MlpModel, TrainStats> train_mlp(const Dataset& dataset, const MlpConfig& config) {
    if (dataset.records.empty()) throw InsufficientData("empty dataset");
    if (config.steps == 0) throw Error("steps must be >= 1");
    const ModelShape shape = ModelShape::from_meta(dataset.meta);
    Rng rng(config.seed);
    MlpModel model(shape, config, rng);
    TrainStats stats;
    stats.losses.reserve(config.steps);

    const std::size_t length = shape.length;
    for (std::size_t step = 0; step < config.steps; ++step) {
        const Record& rec = dataset.records[uniform_below(rng, dataset.records.size())];
        const auto mask_count =
            static_cast<std::size_t>(uniform_int(rng, 1, static_cast<std::int64_t>(length)));
        const std::vector<std::size_t> mask_slots =
            sample_without_replacement(rng, length, mask_count);

        LatentState state(std::vector<std::int32_t>(rec.tokens));
        for (std::size_t slot : mask_slots) state.slots[slot] = LatentState::kMasked;

        const SceneObject& obj = rec.objects[uniform_below(rng, rec.objects.size())];
        std::optional<Condition> cond = Condition{obj.row, obj.col, obj.color_id};
        if (canonical(rng) < config.dropout_p) {
            cond.reset();
            stats.null_condition_steps++;
        }

        const double loss = model.example_loss(state, rec.tokens, cond);
        if (!std::isfinite(loss)) throw TrainingDiverged("non-finite training loss");
        const std::vector<double> grad = model.example_gradient(state, rec.tokens, cond);
        auto& params = model.parameters();
        for (std::size_t i = 0; i < params.size(); ++i) {
            params[i] -= config.learning_rate * grad[i];
        }
        stats.losses.push_back(loss);
        stats.steps++;
    }
    return {std::move(model), std::move(stats)};
}

// ---------------------------------------------------------------------------
// Checkpoints

namespace {

nlohmann::json shape_to_json(const ModelShape& shape) {
    return {{"length", shape.length}, {"vocab", shape.vocab}, {"grid_cols", shape.grid_cols}};
}

ModelShape shape_from_json(const nlohmann::json& j) {
    return {j["length"].get<std::size_t>(), j["vocab"].get<std::size_t>(),
            j["grid_cols"].get<std::size_t>()};
}

void write_json_file(const nlohmann::json& j, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot open " + path.string() + " for writing");
    out << j.dump(1) << "\n";
}

nlohmann::json read_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open " + path.string());
    nlohmann::json j;
    in >> j;
    return j;
}

} // namespace

void save_model(const TabularModel& model, const DatasetMeta& meta,
                const std::filesystem::path& path) {
    nlohmann::json j;
    j["version"] = 1;
    j["type"] = "tabular";
    j["meta"] = meta_to_json(meta);
    j["shapes"] = shape_to_json(model.shape());
    j["alpha"] = model.alpha();
    j["unconditional"] = {{"counts", model.unconditional().counts},
                          {"total", model.unconditional().total}};
    auto& conds = j["conditional"] = nlohmann::json::array();
    for (const auto& [cond, table] : model.conditional()) {
        conds.push_back({{"r", cond.row},
                         {"c", cond.col},
                         {"color", cond.color_id},
                         {"counts", table.counts},
                         {"total", table.total}});
    }
    write_json_file(j, path);
}

void save_model(const MlpModel& model, const DatasetMeta& meta,
                const std::filesystem::path& path) {
    nlohmann::json j;
    j["version"] = 1;
    j["type"] = "mlp";
    j["meta"] = meta_to_json(meta);
    nlohmann::json shapes = shape_to_json(model.shape());
    shapes["embed_dim"] = model.config().embed_dim;
    shapes["hidden_dim"] = model.config().hidden_dim;
    j["shapes"] = shapes;
    j["train_config"] = {{"steps", model.config().steps},
                         {"learning_rate", model.config().learning_rate},
                         {"dropout_p", model.config().dropout_p},
                         {"seed", model.config().seed}};
    j["params"] = model.parameters();
    write_json_file(j, path);
}

LoadedModel load_model(const std::filesystem::path& path) {
    const nlohmann::json j = read_json_file(path);
    if (!j.contains("version") || j["version"].get<int>() != 1) {
        throw FormatError("unsupported checkpoint version");
    }
    LoadedModel loaded;
    loaded.meta = meta_from_json(j["meta"]);
    loaded.type = j["type"].get<std::string>();
    const ModelShape shape = shape_from_json(j["shapes"]);
    if (loaded.type == "tabular") {
        TabularModel::Table uncond;
        uncond.counts = j["unconditional"]["counts"].get<std::vector<double>>();
        uncond.total = j["unconditional"]["total"].get<double>();
        std::map<Condition, TabularModel::Table> conds;
        for (const auto& c : j["conditional"]) {
            Condition cond{c["r"].get<std::size_t>(), c["c"].get<std::size_t>(),
                           c["color"].get<std::size_t>()};
            TabularModel::Table table;
            table.counts = c["counts"].get<std::vector<double>>();
            table.total = c["total"].get<double>();
            conds.emplace(cond, std::move(table));
        }
        loaded.model = std::make_unique<TabularModel>(shape, j["alpha"].get<double>(),
                                                      std::move(uncond), std::move(conds));
    } else if (loaded.type == "mlp") {
        MlpConfig config;
        config.embed_dim = j["shapes"]["embed_dim"].get<std::size_t>();
        config.hidden_dim = j["shapes"]["hidden_dim"].get<std::size_t>();
        if (j.contains("train_config")) {
            config.steps = j["train_config"]["steps"].get<std::size_t>();
            config.learning_rate = j["train_config"]["learning_rate"].get<double>();
            config.dropout_p = j["train_config"]["dropout_p"].get<double>();
            config.seed = j["train_config"]["seed"].get<std::uint64_t>();
        }
        loaded.model = std::make_unique<MlpModel>(MlpModel::from_parameters(
            shape, config, j["params"].get<std::vector<double>>()));
    } else {
        throw FormatError("unknown checkpoint type: " + loaded.type);
    }
    return loaded;
}

} // namespace ctp
