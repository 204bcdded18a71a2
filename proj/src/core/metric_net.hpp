#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "kernels.hpp"

namespace gk {

enum class DistanceMetric : std::uint8_t { euclidean = 0, cosine = 1 };

std::string_view to_string(DistanceMetric metric);
DistanceMetric parse_metric(std::string_view token);

// Kernel slots in every triple: Weisfeiler-Lehman, temporal, vertex histogram.
inline constexpr int kKernelCount = 3;

struct NetConfig {
    int embed_dim_per_kernel = 64;
    int fusion_dim = 16;
    int classifier_dim = 16;  // classifier input width; must equal fusion_dim
    double margin_lambda = 1.0;
    DistanceMetric metric = DistanceMetric::euclidean;
    double learning_rate = 1e-4;
    int batch_size = 64;
    int max_epochs = 1000;
    int early_stop_patience = 20;
    std::uint64_t seed = 0;

    // 5000/50/50 wide layers.
    static NetConfig full_scale();
    void validate() const;
};

struct TensorSlot {
    std::string name;
    Eigen::Index rows = 0;
    Eigen::Index cols = 0;
    Eigen::Index offset = 0;
};

// Three per-kernel affine layers (N -> embed) with rectifiers, a linear
// fusion layer (3*embed -> fusion) producing the embedding, and a sigmoid
// classifier (fusion -> 1). All parameters live in one flat vector; matrices
// are column-major views into it.
class EmbedNet {
public:
    EmbedNet() = default;
    EmbedNet(Eigen::Index input_dim, int embed_dim, int fusion_dim);

    Eigen::Index input_dim() const { return input_dim_; }
    int embed_dim() const { return embed_dim_; }
    int fusion_dim() const { return fusion_dim_; }

    Eigen::VectorXd& parameters() { return params_; }
    const Eigen::VectorXd& parameters() const { return params_; }
    const std::vector<TensorSlot>& layout() const { return layout_; }

    Eigen::Map<Eigen::MatrixXd> tensor(std::size_t slot);
    Eigen::Map<const Eigen::MatrixXd> tensor(std::size_t slot) const;

    // Slot indices.
    static std::size_t kernel_weight(int k) { return static_cast<std::size_t>(2 * k); }
    static std::size_t kernel_bias(int k) { return static_cast<std::size_t>(2 * k + 1); }
    static constexpr std::size_t fusion_weight = 6;
    static constexpr std::size_t fusion_bias = 7;
    static constexpr std::size_t classifier_weight = 8;
    static constexpr std::size_t classifier_bias = 9;

    // Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) for every weight and bias.
    void initialize(std::uint64_t seed);
    bool all_finite() const { return params_.allFinite(); }

    friend bool operator==(const EmbedNet& a, const EmbedNet& b) {
        return a.input_dim_ == b.input_dim_ && a.embed_dim_ == b.embed_dim_ && a.fusion_dim_ == b.fusion_dim_ &&
               a.params_.size() == b.params_.size() && a.params_ == b.params_;
    }

private:
    Eigen::Index input_dim_ = 0;
    int embed_dim_ = 0;
    int fusion_dim_ = 0;
    std::vector<TensorSlot> layout_;
    Eigen::VectorXd params_;
};

// Kernel rows of a batch, stored as columns: inputs[k] is N x B.
using KernelBatch = std::array<Eigen::MatrixXd, kKernelCount>;

double euclidean_distance(const Eigen::Ref<const Eigen::VectorXd>& a, const Eigen::Ref<const Eigen::VectorXd>& b);
double cosine_distance(const Eigen::Ref<const Eigen::VectorXd>& a, const Eigen::Ref<const Eigen::VectorXd>& b);
double distance(DistanceMetric metric, const Eigen::Ref<const Eigen::VectorXd>& a,
                const Eigen::Ref<const Eigen::VectorXd>& b);

// Embeddings as columns (d x B). Sum over all B^2 ordered pairs of
// (1-Y)·max(0, λ-D)² + Y·D, divided by B.
double contrastive_loss(const Eigen::MatrixXd& embeddings, std::span<const int> labels, double lambda,
                        DistanceMetric metric);

inline constexpr double kProbabilityClip = 1e-7;

double binary_cross_entropy(std::span<const double> probs, std::span<const int> labels);

Eigen::VectorXd forward_embed(const EmbedNet& net, const std::array<Eigen::VectorXd, kKernelCount>& rows);
Eigen::MatrixXd forward_embed_batch(const EmbedNet& net, const KernelBatch& inputs);

struct LossParts {
    double contrastive = 0.0;
    double crossentropy = 0.0;
    double joint = 0.0;
};

// Pairs flagged true are left out of the contrastive sum (B x B, row-major).
using PairMask = std::vector<std::uint8_t>;

// Joint loss on one batch. When `gradient` is non-null it receives d(joint)/d(params)
// in the net's flat layout: the contrastive term reaches the embedding
// parameters only; cross-entropy reaches embedding and classifier.
LossParts joint_loss(const EmbedNet& net, const KernelBatch& inputs, std::span<const int> labels,
                     const NetConfig& config, Eigen::VectorXd* gradient = nullptr,
                     const PairMask* excluded_pairs = nullptr);

// max_i |a_i - n_i| / max(1e-8, |a_i| + |n_i|).
double max_relative_deviation(const Eigen::VectorXd& analytic, const Eigen::VectorXd& numeric);

// Analytic gradient of joint_loss vs central differences over every parameter.
// Pairs with |λ - D_ij| < 10·epsilon at the base point are excluded from both.
double gradient_check(const EmbedNet& net, const KernelBatch& inputs, std::span<const int> labels,
                      const NetConfig& config, double epsilon);

enum class StopReason : std::uint8_t { converged = 0, max_epochs = 1 };

struct EpochLoss {
    double contrastive = 0.0;
    double crossentropy = 0.0;
    double joint = 0.0;
};

struct TrainTrace {
    std::vector<EpochLoss> epochs;
    int stop_epoch = 0;
    StopReason stop_reason = StopReason::max_epochs;

    friend bool operator==(const TrainTrace& a, const TrainTrace& b) {
        if (a.stop_epoch != b.stop_epoch || a.stop_reason != b.stop_reason || a.epochs.size() != b.epochs.size()) {
            return false;
        }
        for (std::size_t i = 0; i < a.epochs.size(); ++i) {
            const auto& x = a.epochs[i];
            const auto& y = b.epochs[i];
            if (x.contrastive != y.contrastive || x.crossentropy != y.crossentropy || x.joint != y.joint) return false;
        }
        return true;
    }
};

struct Adamax {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    double learning_rate = 1e-4;
    Eigen::VectorXd first_moment;
    Eigen::VectorXd infinity_norm;
    long step = 0;

    void reset(Eigen::Index size);
    void update(Eigen::VectorXd& params, const Eigen::VectorXd& gradient);
};

struct TrainResult {
    EmbedNet net;
    TrainTrace trace;
};

using GramTriple = std::array<const GramMatrix*, kKernelCount>;

TrainResult train(const GramTriple& grams, std::span<const int> labels, const NetConfig& config);

// Gathers columns `rows` of each symmetric Gram into a batch.
KernelBatch gather_batch(const GramTriple& grams, std::span<const std::size_t> rows);

struct Prediction {
    double probability = 0.5;
    int label = 1;
};

// cross_rows[k] is T x N.
std::vector<Prediction> predict(const EmbedNet& net, const std::array<Eigen::MatrixXd, kKernelCount>& cross_rows);
Eigen::MatrixXd embed_rows(const EmbedNet& net, const std::array<Eigen::MatrixXd, kKernelCount>& cross_rows);

void save_model(std::ostream& out, const EmbedNet& net, const NetConfig& config);
struct LoadedModel {
    EmbedNet net;
    NetConfig config;
};
LoadedModel load_model(std::istream& in);

void write_trace_csv(std::ostream& out, const TrainTrace& trace);

}  // namespace gk
