#include "metric_net.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <numeric>
#include <ostream>

#include "binary_io.hpp"
#include "error.hpp"
#include "rng.hpp"

namespace gk {

namespace {

constexpr std::uint32_t kModelVersion = 1;
constexpr double kEarlyStopTolerance = 1e-6;

double sigmoid(double s) {
    if (s >= 0.0) return 1.0 / (1.0 + std::exp(-s));
    const double e = std::exp(s);
    return e / (1.0 + e);
}

Eigen::Map<Eigen::MatrixXd> view(Eigen::VectorXd& flat, const TensorSlot& slot) {
    return {flat.data() + slot.offset, slot.rows, slot.cols};
}

struct ForwardCache {
    std::array<Eigen::MatrixXd, kKernelCount> pre;  // per-kernel affine images, embed x B
    Eigen::MatrixXd hidden;                          // rectified and stacked, 3*embed x B
    Eigen::MatrixXd embedding;                       // fusion x B
    Eigen::RowVectorXd logits;                       // 1 x B
};

void check_inputs(const EmbedNet& net, const KernelBatch& inputs) {
    const auto batch = inputs[0].cols();
    for (int k = 0; k < kKernelCount; ++k) {
        if (inputs[k].rows() != net.input_dim()) {
            fail(ErrorKind::invalid_argument, "kernel row length " + std::to_string(inputs[k].rows()) +
                                                  " does not match network input size " +
                                                  std::to_string(net.input_dim()));
        }
        if (inputs[k].cols() != batch) fail(ErrorKind::invalid_argument, "kernel batches differ in size");
    }
}

ForwardCache forward(const EmbedNet& net, const KernelBatch& inputs) {
    check_inputs(net, inputs);
    const auto batch = inputs[0].cols();
    const int embed = net.embed_dim();
    ForwardCache cache;
    cache.hidden.resize(kKernelCount * embed, batch);
    for (int k = 0; k < kKernelCount; ++k) {
        cache.pre[k] = net.tensor(EmbedNet::kernel_weight(k)) * inputs[k];
        cache.pre[k].colwise() += net.tensor(EmbedNet::kernel_bias(k)).col(0);
        cache.hidden.middleRows(k * embed, embed) = cache.pre[k].cwiseMax(0.0);
    }
    cache.embedding = net.tensor(EmbedNet::fusion_weight) * cache.hidden;
    cache.embedding.colwise() += net.tensor(EmbedNet::fusion_bias).col(0);
    cache.logits = net.tensor(EmbedNet::classifier_weight).col(0).transpose() * cache.embedding;
    cache.logits.array() += net.tensor(EmbedNet::classifier_bias)(0, 0);
    return cache;
}

void check_labels(std::span<const int> labels) {
    for (int y : labels) {
        if (y != 0 && y != 1) fail(ErrorKind::invalid_argument, "labels must be 0 or 1");
    }
}

}  // namespace

std::string_view to_string(DistanceMetric metric) {
    return metric == DistanceMetric::cosine ? "cosine" : "euclidean";
}

DistanceMetric parse_metric(std::string_view token) {
    if (token == "euclidean") return DistanceMetric::euclidean;
    if (token == "cosine") return DistanceMetric::cosine;
    fail(ErrorKind::invalid_argument, "unknown distance metric '" + std::string(token) + "'");
}

NetConfig NetConfig::full_scale() {
    NetConfig c;
    c.embed_dim_per_kernel = 5000;
    c.fusion_dim = 50;
    c.classifier_dim = 50;
    return c;
}

void NetConfig::validate() const {
    if (embed_dim_per_kernel < 1 || fusion_dim < 1 || classifier_dim < 1) {
        fail(ErrorKind::invalid_argument, "network dimensions must be >= 1");
    }
    if (classifier_dim != fusion_dim) {
        fail(ErrorKind::invalid_argument, "classifier_dim (" + std::to_string(classifier_dim) +
                                              ") must equal fusion_dim (" + std::to_string(fusion_dim) + ")");
    }
    if (!(margin_lambda > 0.0) || !std::isfinite(margin_lambda)) {
        fail(ErrorKind::invalid_argument, "margin_lambda must be positive");
    }
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
        fail(ErrorKind::invalid_argument, "learning_rate must be positive");
    }
    if (batch_size < 1) fail(ErrorKind::invalid_argument, "batch_size must be >= 1");
    if (max_epochs < 0) fail(ErrorKind::invalid_argument, "max_epochs must be >= 0");
    if (early_stop_patience < 1) fail(ErrorKind::invalid_argument, "early_stop_patience must be >= 1");
}

EmbedNet::EmbedNet(Eigen::Index input_dim, int embed_dim, int fusion_dim)
    : input_dim_(input_dim), embed_dim_(embed_dim), fusion_dim_(fusion_dim) {
    if (input_dim < 1 || embed_dim < 1 || fusion_dim < 1) {
        fail(ErrorKind::invalid_argument, "network dimensions must be >= 1");
    }
    Eigen::Index offset = 0;
    auto add = [&](std::string name, Eigen::Index rows, Eigen::Index cols) {
        layout_.push_back({std::move(name), rows, cols, offset});
        offset += rows * cols;
    };
    static constexpr const char* kNames[kKernelCount] = {"wl", "tp", "vh"};
    for (int k = 0; k < kKernelCount; ++k) {
        add(std::string(kNames[k]) + ".weight", embed_dim, input_dim);
        add(std::string(kNames[k]) + ".bias", embed_dim, 1);
    }
    add("fusion.weight", fusion_dim, kKernelCount * embed_dim);
    add("fusion.bias", fusion_dim, 1);
    add("classifier.weight", fusion_dim, 1);
    add("classifier.bias", 1, 1);
    params_ = Eigen::VectorXd::Zero(offset);
}

Eigen::Map<Eigen::MatrixXd> EmbedNet::tensor(std::size_t slot) { return view(params_, layout_.at(slot)); }

Eigen::Map<const Eigen::MatrixXd> EmbedNet::tensor(std::size_t slot) const {
    const auto& s = layout_.at(slot);
    return {params_.data() + s.offset, s.rows, s.cols};
}

void EmbedNet::initialize(std::uint64_t seed) {
    Rng rng(seed);
    const Eigen::Index fan_in[] = {input_dim_, input_dim_, input_dim_, input_dim_, input_dim_, input_dim_,
                                   kKernelCount * embed_dim_, kKernelCount * embed_dim_, fusion_dim_, fusion_dim_};
    for (std::size_t s = 0; s < layout_.size(); ++s) {
        const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in[s]));
        auto t = tensor(s);
        for (Eigen::Index j = 0; j < t.cols(); ++j) {
            for (Eigen::Index i = 0; i < t.rows(); ++i) t(i, j) = rng.uniform(-bound, bound);
        }
    }
}

double euclidean_distance(const Eigen::Ref<const Eigen::VectorXd>& a, const Eigen::Ref<const Eigen::VectorXd>& b) {
    if (a.size() != b.size()) {
        fail(ErrorKind::invalid_argument, "euclidean distance of vectors with lengths " + std::to_string(a.size()) +
                                              " and " + std::to_string(b.size()));
    }
    return (a - b).norm();
}

double cosine_distance(const Eigen::Ref<const Eigen::VectorXd>& a, const Eigen::Ref<const Eigen::VectorXd>& b) {
    if (a.size() != b.size()) fail(ErrorKind::invalid_argument, "cosine distance of vectors with different lengths");
    const double na = a.norm();
    const double nb = b.norm();
    if (!(na > 0.0) || !(nb > 0.0)) fail(ErrorKind::numeric, "cosine distance undefined for a zero-norm vector");
    const double similarity = std::clamp(a.dot(b) / (na * nb), -1.0, 1.0);
    return 1.0 - similarity;
}

double distance(DistanceMetric metric, const Eigen::Ref<const Eigen::VectorXd>& a,
                const Eigen::Ref<const Eigen::VectorXd>& b) {
    return metric == DistanceMetric::cosine ? cosine_distance(a, b) : euclidean_distance(a, b);
}

double contrastive_loss(const Eigen::MatrixXd& embeddings, std::span<const int> labels, double lambda,
                        DistanceMetric metric) {
    if (!(lambda > 0.0)) fail(ErrorKind::invalid_argument, "margin lambda must be positive");
    const auto b = static_cast<Eigen::Index>(labels.size());
    if (b < 1 || embeddings.cols() != b) fail(ErrorKind::invalid_argument, "contrastive loss: batch size mismatch");
    double sum = 0.0;
    for (Eigen::Index i = 0; i < b; ++i) {
        for (Eigen::Index j = 0; j < b; ++j) {
            const double d = distance(metric, embeddings.col(i), embeddings.col(j));
            if (labels[i] == labels[j]) {
                sum += d;
            } else {
                const double hinge = std::max(0.0, lambda - d);
                sum += hinge * hinge;
            }
        }
    }
    return sum / static_cast<double>(b);
}

double binary_cross_entropy(std::span<const double> probs, std::span<const int> labels) {
    if (probs.size() != labels.size() || probs.empty()) {
        fail(ErrorKind::invalid_argument, "cross-entropy: probability and label counts differ");
    }
    double sum = 0.0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
        const double p = std::clamp(probs[i], kProbabilityClip, 1.0 - kProbabilityClip);
        sum += labels[i] == 1 ? std::log(p) : std::log1p(-p);
    }
    return -sum / static_cast<double>(probs.size());
}

Eigen::MatrixXd forward_embed_batch(const EmbedNet& net, const KernelBatch& inputs) {
    return forward(net, inputs).embedding;
}

Eigen::VectorXd forward_embed(const EmbedNet& net, const std::array<Eigen::VectorXd, kKernelCount>& rows) {
    KernelBatch batch;
    for (int k = 0; k < kKernelCount; ++k) batch[k] = rows[k];
    return forward(net, batch).embedding.col(0);
}

LossParts joint_loss(const EmbedNet& net, const KernelBatch& inputs, std::span<const int> labels,
                     const NetConfig& config, Eigen::VectorXd* gradient, const PairMask* excluded_pairs) {
    check_labels(labels);
    const auto b = static_cast<Eigen::Index>(labels.size());
    if (b < 1) fail(ErrorKind::invalid_argument, "joint loss of an empty batch");
    if (inputs[0].cols() != b) fail(ErrorKind::invalid_argument, "joint loss: batch and label counts differ");
    if (excluded_pairs && excluded_pairs->size() != static_cast<std::size_t>(b * b)) {
        fail(ErrorKind::invalid_argument, "pair mask must be B x B");
    }
    const ForwardCache cache = forward(net, inputs);
    const Eigen::MatrixXd& e = cache.embedding;
    const double inv_b = 1.0 / static_cast<double>(b);
    const double lambda = config.margin_lambda;
    const bool cosine = config.metric == DistanceMetric::cosine;

    Eigen::VectorXd norms;
    if (cosine) {
        norms = e.colwise().norm().transpose();
        for (Eigen::Index i = 0; i < b; ++i) {
            if (!(norms[i] > 0.0)) fail(ErrorKind::numeric, "cosine distance undefined: zero-norm embedding");
        }
    }

    LossParts parts;
    Eigen::MatrixXd d_embedding;
    if (gradient) d_embedding = Eigen::MatrixXd::Zero(e.rows(), b);

    double contrastive = 0.0;
    for (Eigen::Index i = 0; i < b; ++i) {
        for (Eigen::Index j = 0; j < b; ++j) {
            if (excluded_pairs && (*excluded_pairs)[static_cast<std::size_t>(i * b + j)]) continue;
            const bool similar = labels[i] == labels[j];
            const double d = distance(config.metric, e.col(i), e.col(j));
            const double hinge = std::max(0.0, lambda - d);
            contrastive += similar ? d : hinge * hinge;
            if (!gradient || i == j) continue;

            const double g = inv_b * (similar ? 1.0 : -2.0 * hinge);
            if (g == 0.0) continue;
            if (cosine) {
                const double na = norms[i], nb = norms[j];
                const double c = e.col(i).dot(e.col(j)) / (na * nb);
                d_embedding.col(i) -= g * (e.col(j) / (na * nb) - c * e.col(i) / (na * na));
                d_embedding.col(j) -= g * (e.col(i) / (na * nb) - c * e.col(j) / (nb * nb));
            } else if (d > 0.0) {
                const Eigen::VectorXd u = (e.col(i) - e.col(j)) / d;
                d_embedding.col(i) += g * u;
                d_embedding.col(j) -= g * u;
            }
        }
    }
    parts.contrastive = contrastive * inv_b;

    Eigen::RowVectorXd d_logits(b);
    double ce = 0.0;
    for (Eigen::Index i = 0; i < b; ++i) {
        const double raw = sigmoid(cache.logits[i]);
        const double p = std::clamp(raw, kProbabilityClip, 1.0 - kProbabilityClip);
        ce += labels[i] == 1 ? std::log(p) : std::log1p(-p);
        const bool clipped = raw < kProbabilityClip || raw > 1.0 - kProbabilityClip;
        d_logits[i] = clipped ? 0.0 : (raw - labels[i]) * inv_b;
    }
    parts.crossentropy = -ce * inv_b;
    parts.joint = parts.contrastive + parts.crossentropy;

    if (!gradient) return parts;

    EmbedNet grad_net = net;  // reuse the layout for the gradient
    Eigen::VectorXd& grad = grad_net.parameters();
    grad.setZero();

    const auto classifier_w = net.tensor(EmbedNet::classifier_weight).col(0);
    grad_net.tensor(EmbedNet::classifier_weight).col(0) = e * d_logits.transpose();
    grad_net.tensor(EmbedNet::classifier_bias)(0, 0) = d_logits.sum();
    d_embedding.noalias() += classifier_w * d_logits;

    grad_net.tensor(EmbedNet::fusion_weight).noalias() = d_embedding * cache.hidden.transpose();
    grad_net.tensor(EmbedNet::fusion_bias).col(0) = d_embedding.rowwise().sum();
    const Eigen::MatrixXd d_hidden = net.tensor(EmbedNet::fusion_weight).transpose() * d_embedding;

    const int embed = net.embed_dim();
    for (int k = 0; k < kKernelCount; ++k) {
        const Eigen::MatrixXd d_pre =
            d_hidden.middleRows(k * embed, embed).cwiseProduct((cache.pre[k].array() > 0.0).cast<double>().matrix());
        grad_net.tensor(EmbedNet::kernel_weight(k)).noalias() = d_pre * inputs[k].transpose();
        grad_net.tensor(EmbedNet::kernel_bias(k)).col(0) = d_pre.rowwise().sum();
    }
    *gradient = std::move(grad);
    return parts;
}

double max_relative_deviation(const Eigen::VectorXd& analytic, const Eigen::VectorXd& numeric) {
    if (analytic.size() != numeric.size()) fail(ErrorKind::invalid_argument, "gradient sizes differ");
    double worst = 0.0;
    for (Eigen::Index i = 0; i < analytic.size(); ++i) {
        const double a = analytic[i], n = numeric[i];
        worst = std::max(worst, std::abs(a - n) / std::max(1e-8, std::abs(a) + std::abs(n)));
    }
    return worst;
}

double gradient_check(const EmbedNet& net, const KernelBatch& inputs, std::span<const int> labels,
                      const NetConfig& config, double epsilon) {
    if (!(epsilon >= 1e-7 && epsilon <= 1e-3)) {
        fail(ErrorKind::invalid_argument, "gradient check epsilon must lie in [1e-7, 1e-3]");
    }
    const auto b = static_cast<Eigen::Index>(labels.size());
    const Eigen::MatrixXd e = forward(net, inputs).embedding;
    PairMask kinks(static_cast<std::size_t>(b * b), 0);
    for (Eigen::Index i = 0; i < b; ++i) {
        for (Eigen::Index j = 0; j < b; ++j) {
            const double d = distance(config.metric, e.col(i), e.col(j));
            if (std::abs(config.margin_lambda - d) < 10.0 * epsilon) kinks[static_cast<std::size_t>(i * b + j)] = 1;
        }
    }

    Eigen::VectorXd analytic;
    joint_loss(net, inputs, labels, config, &analytic, &kinks);
    if (!analytic.allFinite()) fail(ErrorKind::numeric, "analytic gradient is not finite");

    EmbedNet probe = net;
    Eigen::VectorXd numeric(analytic.size());
    for (Eigen::Index p = 0; p < analytic.size(); ++p) {
        const double saved = probe.parameters()[p];
        probe.parameters()[p] = saved + epsilon;
        const double up = joint_loss(probe, inputs, labels, config, nullptr, &kinks).joint;
        probe.parameters()[p] = saved - epsilon;
        const double down = joint_loss(probe, inputs, labels, config, nullptr, &kinks).joint;
        probe.parameters()[p] = saved;
        numeric[p] = (up - down) / (2.0 * epsilon);
    }
    if (!numeric.allFinite()) fail(ErrorKind::numeric, "numeric gradient is not finite");
    return max_relative_deviation(analytic, numeric);
}

void Adamax::reset(Eigen::Index size) {
    first_moment = Eigen::VectorXd::Zero(size);
    infinity_norm = Eigen::VectorXd::Zero(size);
    step = 0;
}

void Adamax::update(Eigen::VectorXd& params, const Eigen::VectorXd& gradient) {
    ++step;
    first_moment = beta1 * first_moment + (1.0 - beta1) * gradient;
    infinity_norm = (beta2 * infinity_norm).cwiseMax(gradient.cwiseAbs());
    const double step_size = learning_rate / (1.0 - std::pow(beta1, static_cast<double>(step)));
    params.array() -= step_size * first_moment.array() / (infinity_norm.array() + epsilon);
}

KernelBatch gather_batch(const GramTriple& grams, std::span<const std::size_t> rows) {
    KernelBatch batch;
    for (int k = 0; k < kKernelCount; ++k) {
        const auto& g = grams[k]->values;
        batch[k].resize(g.rows(), static_cast<Eigen::Index>(rows.size()));
        for (std::size_t c = 0; c < rows.size(); ++c) {
            batch[k].col(static_cast<Eigen::Index>(c)) = g.col(static_cast<Eigen::Index>(rows[c]));
        }
    }
    return batch;
}

TrainResult train(const GramTriple& grams, std::span<const int> labels, const NetConfig& config) {
    config.validate();
    check_labels(labels);
    const auto n = static_cast<Eigen::Index>(labels.size());
    if (n < 2) fail(ErrorKind::invalid_argument, "training needs at least 2 cases");
    for (int k = 0; k < kKernelCount; ++k) {
        if (!grams[k] || grams[k]->values.rows() != n || grams[k]->values.cols() != n) {
            fail(ErrorKind::invalid_argument, "every Gram matrix must be N x N with N = label count");
        }
    }
    const auto positives = std::count(labels.begin(), labels.end(), 1);
    if (positives == 0 || positives == n) fail(ErrorKind::data, "training labels contain a single class");

    TrainResult result{EmbedNet(n, config.embed_dim_per_kernel, config.fusion_dim), {}};
    result.net.initialize(derive_seed(config.seed, 0));
    if (config.max_epochs == 0) return result;

    Adamax optimizer;
    optimizer.learning_rate = config.learning_rate;
    optimizer.reset(result.net.parameters().size());

    Rng shuffler(derive_seed(config.seed, 1));
    std::vector<std::size_t> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::vector<int> batch_labels;
    Eigen::VectorXd gradient;

    double best = std::numeric_limits<double>::infinity();
    int stale = 0;
    auto& trace = result.trace;
    for (int epoch = 0; epoch < config.max_epochs; ++epoch) {
        shuffler.shuffle(order);
        EpochLoss sum;
        int batches = 0;
        for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(config.batch_size)) {
            const std::size_t stop = std::min(order.size(), start + static_cast<std::size_t>(config.batch_size));
            const std::span<const std::size_t> rows(order.data() + start, stop - start);
            batch_labels.clear();
            for (auto r : rows) batch_labels.push_back(labels[r]);
            const KernelBatch batch = gather_batch(grams, rows);
            const LossParts loss = joint_loss(result.net, batch, batch_labels, config, &gradient);
            if (!std::isfinite(loss.joint) || !gradient.allFinite()) {
                fail(ErrorKind::numeric, "non-finite loss at epoch " + std::to_string(epoch));
            }
            optimizer.update(result.net.parameters(), gradient);
            sum.contrastive += loss.contrastive;
            sum.crossentropy += loss.crossentropy;
            sum.joint += loss.joint;
            ++batches;
        }
        const double inv = 1.0 / batches;
        trace.epochs.push_back({sum.contrastive * inv, sum.crossentropy * inv, sum.joint * inv});
        trace.stop_epoch = epoch + 1;

        const double epoch_loss = trace.epochs.back().joint;
        if (epoch_loss < best - kEarlyStopTolerance) {
            best = epoch_loss;
            stale = 0;
        } else if (++stale >= config.early_stop_patience) {
            trace.stop_reason = StopReason::converged;
            return result;
        }
    }
    trace.stop_reason = StopReason::max_epochs;
    return result;
}

Eigen::MatrixXd embed_rows(const EmbedNet& net, const std::array<Eigen::MatrixXd, kKernelCount>& cross_rows) {
    KernelBatch batch;
    for (int k = 0; k < kKernelCount; ++k) {
        if (cross_rows[k].cols() != net.input_dim()) {
            fail(ErrorKind::invalid_argument, "cross-Gram has " + std::to_string(cross_rows[k].cols()) +
                                                  " columns; network expects " + std::to_string(net.input_dim()));
        }
        batch[k] = cross_rows[k].transpose();
    }
    return forward(net, batch).embedding;
}

std::vector<Prediction> predict(const EmbedNet& net, const std::array<Eigen::MatrixXd, kKernelCount>& cross_rows) {
    KernelBatch batch;
    for (int k = 0; k < kKernelCount; ++k) {
        if (cross_rows[k].cols() != net.input_dim()) {
            fail(ErrorKind::invalid_argument, "cross-Gram has " + std::to_string(cross_rows[k].cols()) +
                                                  " columns; network expects " + std::to_string(net.input_dim()));
        }
        if (cross_rows[k].rows() != cross_rows[0].rows()) {
            fail(ErrorKind::invalid_argument, "cross-Gram row counts differ");
        }
        batch[k] = cross_rows[k].transpose();
    }
    const ForwardCache cache = forward(net, batch);
    constexpr double kLowest = std::numeric_limits<double>::min();
    constexpr double kHighest = 1.0 - 0x1.0p-53;
    std::vector<Prediction> out;
    out.reserve(static_cast<std::size_t>(cache.logits.size()));
    for (Eigen::Index i = 0; i < cache.logits.size(); ++i) {
        const double p = std::clamp(sigmoid(cache.logits[i]), kLowest, kHighest);
        out.push_back({p, p >= 0.5 ? 1 : 0});
    }
    return out;
}

void save_model(std::ostream& out, const EmbedNet& net, const NetConfig& config) {
    binary::put_magic(out, "KNET");
    binary::put<std::uint32_t>(out, kModelVersion);
    binary::put<std::uint32_t>(out, static_cast<std::uint32_t>(config.embed_dim_per_kernel));
    binary::put<std::uint32_t>(out, static_cast<std::uint32_t>(config.fusion_dim));
    binary::put<std::uint32_t>(out, static_cast<std::uint32_t>(config.classifier_dim));
    binary::put<double>(out, config.margin_lambda);
    binary::put<std::uint32_t>(out, static_cast<std::uint32_t>(config.metric));
    binary::put<double>(out, config.learning_rate);
    binary::put<std::uint32_t>(out, static_cast<std::uint32_t>(config.batch_size));
    binary::put<std::uint32_t>(out, static_cast<std::uint32_t>(config.max_epochs));
    binary::put<std::uint32_t>(out, static_cast<std::uint32_t>(config.early_stop_patience));
    binary::put<std::uint64_t>(out, config.seed);
    binary::put<std::uint64_t>(out, static_cast<std::uint64_t>(net.input_dim()));
    binary::put<std::uint32_t>(out, static_cast<std::uint32_t>(net.layout().size()));
    for (std::size_t s = 0; s < net.layout().size(); ++s) {
        const auto t = net.tensor(s);
        binary::put<std::uint32_t>(out, static_cast<std::uint32_t>(t.rows()));
        binary::put<std::uint32_t>(out, static_cast<std::uint32_t>(t.cols()));
        for (Eigen::Index i = 0; i < t.rows(); ++i) {
            for (Eigen::Index j = 0; j < t.cols(); ++j) binary::put<double>(out, t(i, j));
        }
    }
    if (!out) fail(ErrorKind::io, "failed writing model");
}

LoadedModel load_model(std::istream& in) {
    binary::expect_magic(in, "KNET");
    const auto version = binary::get<std::uint32_t>(in, "model version");
    if (version != kModelVersion) fail(ErrorKind::parse, "unsupported model version " + std::to_string(version));
    NetConfig config;
    config.embed_dim_per_kernel = static_cast<int>(binary::get<std::uint32_t>(in, "embed dim"));
    config.fusion_dim = static_cast<int>(binary::get<std::uint32_t>(in, "fusion dim"));
    config.classifier_dim = static_cast<int>(binary::get<std::uint32_t>(in, "classifier dim"));
    config.margin_lambda = binary::get<double>(in, "margin");
    const auto metric = binary::get<std::uint32_t>(in, "metric");
    if (metric > 1) fail(ErrorKind::parse, "unknown metric tag in model");
    config.metric = static_cast<DistanceMetric>(metric);
    config.learning_rate = binary::get<double>(in, "learning rate");
    config.batch_size = static_cast<int>(binary::get<std::uint32_t>(in, "batch size"));
    config.max_epochs = static_cast<int>(binary::get<std::uint32_t>(in, "max epochs"));
    config.early_stop_patience = static_cast<int>(binary::get<std::uint32_t>(in, "patience"));
    config.seed = binary::get<std::uint64_t>(in, "seed");
    config.validate();
    const auto input_dim = binary::get<std::uint64_t>(in, "input dim");

    LoadedModel model{EmbedNet(static_cast<Eigen::Index>(input_dim), config.embed_dim_per_kernel, config.fusion_dim),
                      config};
    const auto count = binary::get<std::uint32_t>(in, "tensor count");
    if (count != model.net.layout().size()) fail(ErrorKind::parse, "model tensor count mismatch");
    for (std::size_t s = 0; s < count; ++s) {
        auto t = model.net.tensor(s);
        const auto rows = binary::get<std::uint32_t>(in, "tensor rows");
        const auto cols = binary::get<std::uint32_t>(in, "tensor cols");
        if (rows != t.rows() || cols != t.cols()) {
            fail(ErrorKind::parse, "tensor '" + model.net.layout()[s].name + "' has unexpected shape");
        }
        for (Eigen::Index i = 0; i < t.rows(); ++i) {
            for (Eigen::Index j = 0; j < t.cols(); ++j) t(i, j) = binary::get<double>(in, "tensor data");
        }
    }
    if (!model.net.all_finite()) fail(ErrorKind::numeric, "model contains non-finite parameters");
    return model;
}

void write_trace_csv(std::ostream& out, const TrainTrace& trace) {
    out << "epoch,contrastive,crossentropy,joint\n";
    out << std::setprecision(17);
    for (std::size_t i = 0; i < trace.epochs.size(); ++i) {
        const auto& e = trace.epochs[i];
        out << i + 1 << ',' << e.contrastive << ',' << e.crossentropy << ',' << e.joint << '\n';
    }
}

}  // namespace gk
