#ifndef TABKG_GENERATOR_HPP
#define TABKG_GENERATOR_HPP

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "tabkg/rng.hpp"
#include "tabkg/table.hpp"

namespace tabkg {

// Maps a table to a dense real matrix (rows x features) and back.
// Numeric/timestamp columns standardize; categorical columns one-hot
// encode and decode by argmax. Constant columns are bypassed and
// replayed verbatim on decode.
class Encoder {
public:
    struct ColumnCode {
        std::string name;
        ColumnKind kind = ColumnKind::Numeric;
        std::size_t offset = 0;  // first feature index
        std::size_t width = 0;   // 0 for constant columns
        double mean = 0.0;
        double stddev = 1.0;
        bool log1p = false;  // derived offset columns: log1p before standardizing
        std::vector<std::string> categories;
        bool constant = false;
        std::string constant_text;  // cell text replayed on decode
    };

    static Encoder fit(const Table& table);

    std::size_t dim() const { return dim_; }
    const std::vector<ColumnCode>& columns() const { return cols_; }
    const std::vector<ColumnMeta>& metas() const { return metas_; }

    Eigen::MatrixXd encode(const Table& table) const;
    Table decode(const Eigen::MatrixXd& features) const;

    std::string to_json_string() const;
    static Encoder from_json_string(const std::string& text);

private:
    std::vector<ColumnCode> cols_;
    std::vector<ColumnMeta> metas_;
    std::size_t dim_ = 0;
};

struct DiffusionConfig {
    int hidden_width = 256;
    int hidden_depth = 3;
    int epochs = 100;
    int batch_size = 128;
    double learning_rate = 1e-3;
    double sigma_data = 1.0;
    double sigma_min = 0.002;
    double sigma_max = 80.0;
    double log_sigma_mean = -1.2;
    double log_sigma_std = 1.2;
    int sample_steps = 50;
    double schedule_rho = 7.0;
    std::uint64_t seed = 1;
};

// Score network trained with EDM preconditioning. Plain dense layers
// with SiLU; gradients are computed by hand so the whole model stays a
// deterministic double-precision Eigen computation.
class DiffusionModel {
public:
    DiffusionModel() = default;
    DiffusionModel(std::size_t data_dim, const DiffusionConfig& cfg);

    std::size_t data_dim() const { return data_dim_; }
    const DiffusionConfig& config() const { return cfg_; }
    const std::vector<double>& loss_curve() const { return loss_curve_; }

    // Flat parameter vector access, used by the finite-difference check.
    std::size_t param_count() const;
    Eigen::VectorXd get_params() const;
    void set_params(const Eigen::VectorXd& params);

    // Denoiser D(x; sigma) for a batch laid out as data_dim x batch.
    Eigen::MatrixXd denoise(const Eigen::MatrixXd& x_noisy,
                            const Eigen::VectorXd& sigmas) const;

    // EDM loss over one batch; grad (same layout as get_params) optional.
    double loss(const Eigen::MatrixXd& x_clean, const Eigen::MatrixXd& noise,
                const Eigen::VectorXd& sigmas, Eigen::VectorXd* grad = nullptr) const;

    void train(const Eigen::MatrixXd& data);  // data: rows x features
    Eigen::MatrixXd sample(std::size_t n, std::uint64_t seed) const;

    std::string to_json_string() const;
    static DiffusionModel from_json_string(const std::string& text);

private:
    struct Layer {
        Eigen::MatrixXd w;
        Eigen::VectorXd b;
    };
    Eigen::MatrixXd forward(const Eigen::MatrixXd& input,
                            std::vector<Eigen::MatrixXd>* cache) const;

    std::size_t data_dim_ = 0;
    DiffusionConfig cfg_;
    std::vector<Layer> layers_;
    std::vector<double> loss_curve_;
};

// Encoder + diffusion model over an encoded table.
struct GeneratorModel {
    Encoder encoder;
    DiffusionModel model;

    Table generate(std::size_t n, std::uint64_t seed) const;

    void save(const std::string& path) const;
    static GeneratorModel load(const std::string& path);
};

GeneratorModel train_generator(const Table& table, const DiffusionConfig& cfg);

// Baseline sampler: each column drawn independently from its empirical
// marginal, destroying all cross-column structure.
Table independent_sample(const Table& table, std::size_t n, std::uint64_t seed);

}  // namespace tabkg

#endif
