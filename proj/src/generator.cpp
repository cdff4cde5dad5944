#include "tabkg/generator.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <stdexcept>

#include "json.hpp"

namespace tabkg {

namespace {

Eigen::MatrixXd silu(const Eigen::MatrixXd& z) {
    return z.array() / (1.0 + (-z.array()).exp());
}

Eigen::MatrixXd silu_grad(const Eigen::MatrixXd& z) {
    Eigen::ArrayXXd s = 1.0 / (1.0 + (-z.array()).exp());
    return (s * (1.0 + z.array() * (1.0 - s))).matrix();
}

}  // namespace

// --- Encoder ---------------------------------------------------------------

Encoder Encoder::fit(const Table& table) {
    Encoder enc;
    enc.metas_ = table.metas();
    std::size_t offset = 0;
    for (std::size_t c = 0; c < table.column_count(); ++c) {
        const ColumnMeta& meta = table.metas()[c];
        const Column& col = table.column(c);
        ColumnCode code;
        code.name = meta.name;
        code.kind = meta.kind;
        code.offset = offset;

        if (meta.kind == ColumnKind::Categorical) {
            std::set<std::string> values;
            for (std::size_t r = 0; r < table.row_count(); ++r)
                if (!col.is_missing(r)) values.insert(col.category(r));
            code.categories.assign(values.begin(), values.end());
            if (code.categories.size() <= 1) {
                code.constant = true;
                code.constant_text =
                    code.categories.empty() ? "" : code.categories.front();
            } else {
                code.width = code.categories.size();
            }
        } else {
            code.log1p = meta.kind == ColumnKind::Numeric &&
                         meta.name.size() > 8 &&
                         meta.name.compare(meta.name.size() - 8, 8, "__offset") == 0;
            double sum = 0.0, sum_sq = 0.0;
            std::size_t n = 0;
            for (std::size_t r = 0; r < table.row_count(); ++r) {
                if (col.is_missing(r)) continue;
                double v = col.numeric_value(r);
                if (code.log1p) v = std::log1p(std::max(0.0, v));
                sum += v;
                sum_sq += v * v;
                ++n;
            }
            if (n == 0) {
                code.constant = true;
            } else {
                code.mean = sum / double(n);
                double var = sum_sq / double(n) - code.mean * code.mean;
                code.stddev = var > 0 ? std::sqrt(var) : 0.0;
                if (code.stddev < 1e-12) {
                    code.constant = true;
                    for (std::size_t r = 0; r < table.row_count(); ++r) {
                        if (!col.is_missing(r)) {
                            code.constant_text = col.cell_text(r);
                            break;
                        }
                    }
                } else {
                    code.width = 1;
                }
            }
        }
        offset += code.width;
        enc.cols_.push_back(std::move(code));
    }
    enc.dim_ = offset;
    return enc;
}

Eigen::MatrixXd Encoder::encode(const Table& table) const {
    const std::size_t n = table.row_count();
    Eigen::MatrixXd x = Eigen::MatrixXd::Zero(n, dim_);
    for (const auto& code : cols_) {
        if (code.constant) continue;
        const Column& col = table.column(code.name);
        if (code.kind == ColumnKind::Categorical) {
            for (std::size_t r = 0; r < n; ++r) {
                if (col.is_missing(r)) continue;
                auto it = std::lower_bound(code.categories.begin(),
                                           code.categories.end(), col.category(r));
                if (it != code.categories.end() && *it == col.category(r))
                    x(r, code.offset + std::size_t(it - code.categories.begin())) = 1.0;
            }
        } else {
            for (std::size_t r = 0; r < n; ++r) {
                if (col.is_missing(r)) continue;
                double v = col.numeric_value(r);
                if (code.log1p) v = std::log1p(std::max(0.0, v));
                x(r, code.offset) = (v - code.mean) / code.stddev;
            }
        }
    }
    return x;
}

Table Encoder::decode(const Eigen::MatrixXd& features) const {
    const std::size_t n = std::size_t(features.rows());
    Table out(metas_);
    for (std::size_t c = 0; c < cols_.size(); ++c) {
        const ColumnCode& code = cols_[c];
        Column& col = out.column_mut(c);
        for (std::size_t r = 0; r < n; ++r) {
            if (code.constant) {
                if (code.constant_text.empty()) {
                    col.push_missing();
                } else if (code.kind == ColumnKind::Categorical) {
                    col.push_category(code.constant_text);
                } else if (code.kind == ColumnKind::Timestamp) {
                    col.push_timestamp(*parse_timestamp(code.constant_text));
                } else {
                    col.push_number(*parse_number(code.constant_text));
                }
                continue;
            }
            if (code.kind == ColumnKind::Categorical) {
                std::size_t best = 0;
                double best_v = features(r, code.offset);
                for (std::size_t k = 1; k < code.categories.size(); ++k) {
                    if (features(r, code.offset + k) > best_v) {
                        best_v = features(r, code.offset + k);
                        best = k;
                    }
                }
                col.push_category(code.categories[best]);
            } else {
                double v = code.mean + code.stddev * features(r, code.offset);
                if (code.log1p) v = std::expm1(v);
                if (code.kind == ColumnKind::Timestamp)
                    col.push_timestamp(std::int64_t(std::llround(v)));
                else
                    col.push_number(v);
            }
        }
    }
    out.set_row_count(n);
    return out;
}

std::string Encoder::to_json_string() const {
    nlohmann::json j;
    j["dim"] = dim_;
    j["metas"] = nlohmann::json::array();
    for (const auto& m : metas_)
        j["metas"].push_back({{"name", m.name},
                              {"description", m.description},
                              {"kind", to_string(m.kind)}});
    j["columns"] = nlohmann::json::array();
    for (const auto& c : cols_) {
        j["columns"].push_back({{"name", c.name},
                                {"kind", to_string(c.kind)},
                                {"offset", c.offset},
                                {"width", c.width},
                                {"mean", c.mean},
                                {"stddev", c.stddev},
                                {"log1p", c.log1p},
                                {"categories", c.categories},
                                {"constant", c.constant},
                                {"constant_text", c.constant_text}});
    }
    return j.dump();
}

Encoder Encoder::from_json_string(const std::string& text) {
    nlohmann::json j = nlohmann::json::parse(text);
    Encoder enc;
    enc.dim_ = j.at("dim").get<std::size_t>();
    for (const auto& jm : j.at("metas")) {
        enc.metas_.push_back({jm.at("name").get<std::string>(),
                              jm.at("description").get<std::string>(),
                              column_kind_from_string(jm.at("kind").get<std::string>())});
    }
    for (const auto& jc : j.at("columns")) {
        ColumnCode c;
        c.name = jc.at("name").get<std::string>();
        c.kind = column_kind_from_string(jc.at("kind").get<std::string>());
        c.offset = jc.at("offset").get<std::size_t>();
        c.width = jc.at("width").get<std::size_t>();
        c.mean = jc.at("mean").get<double>();
        c.stddev = jc.at("stddev").get<double>();
        c.log1p = jc.at("log1p").get<bool>();
        c.categories = jc.at("categories").get<std::vector<std::string>>();
        c.constant = jc.at("constant").get<bool>();
        c.constant_text = jc.at("constant_text").get<std::string>();
        enc.cols_.push_back(std::move(c));
    }
    return enc;
}

// --- DiffusionModel --------------------------------------------------------

DiffusionModel::DiffusionModel(std::size_t data_dim, const DiffusionConfig& cfg)
    : data_dim_(data_dim), cfg_(cfg) {
    if (data_dim_ == 0) return;
    Rng rng(cfg_.seed);
    std::vector<std::size_t> widths;
    widths.push_back(data_dim_ + 1);  // +1: noise-level channel
    for (int l = 0; l < cfg_.hidden_depth; ++l)
        widths.push_back(std::size_t(cfg_.hidden_width));
    widths.push_back(data_dim_);
    for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
        Layer layer;
        double scale = std::sqrt(2.0 / double(widths[l]));
        layer.w = Eigen::MatrixXd(widths[l + 1], widths[l]);
        for (Eigen::Index i = 0; i < layer.w.size(); ++i)
            layer.w.data()[i] = scale * rng.normal();
        layer.b = Eigen::VectorXd::Zero(widths[l + 1]);
        layers_.push_back(std::move(layer));
    }
}

std::size_t DiffusionModel::param_count() const {
    std::size_t n = 0;
    for (const auto& l : layers_) n += std::size_t(l.w.size() + l.b.size());
    return n;
}

Eigen::VectorXd DiffusionModel::get_params() const {
    Eigen::VectorXd p(param_count());
    Eigen::Index at = 0;
    for (const auto& l : layers_) {
        p.segment(at, l.w.size()) = Eigen::Map<const Eigen::VectorXd>(l.w.data(), l.w.size());
        at += l.w.size();
        p.segment(at, l.b.size()) = l.b;
        at += l.b.size();
    }
    return p;
}

void DiffusionModel::set_params(const Eigen::VectorXd& params) {
    if (params.size() != Eigen::Index(param_count()))
        throw std::runtime_error("parameter vector size mismatch");
    Eigen::Index at = 0;
    for (auto& l : layers_) {
        Eigen::Map<Eigen::VectorXd>(l.w.data(), l.w.size()) =
            params.segment(at, l.w.size());
        at += l.w.size();
        l.b = params.segment(at, l.b.size());
        at += l.b.size();
    }
}

Eigen::MatrixXd DiffusionModel::forward(const Eigen::MatrixXd& input,
                                        std::vector<Eigen::MatrixXd>* cache) const {
    Eigen::MatrixXd a = input;
    if (cache) cache->push_back(a);
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        Eigen::MatrixXd z = (layers_[l].w * a).colwise() + layers_[l].b;
        if (l + 1 == layers_.size()) return z;
        if (cache) cache->push_back(z);  // pre-activation, for SiLU'
        a = silu(z);
        if (cache) cache->push_back(a);
    }
    return a;  // unreachable for non-empty nets
}

Eigen::MatrixXd DiffusionModel::denoise(const Eigen::MatrixXd& x_noisy,
                                        const Eigen::VectorXd& sigmas) const {
    const double sd2 = cfg_.sigma_data * cfg_.sigma_data;
    const Eigen::Index batch = x_noisy.cols();
    Eigen::MatrixXd input(x_noisy.rows() + 1, batch);
    Eigen::MatrixXd d(x_noisy.rows(), batch);
    for (Eigen::Index i = 0; i < batch; ++i) {
        double s2 = sigmas[i] * sigmas[i];
        double c_in = 1.0 / std::sqrt(sd2 + s2);
        input.col(i).head(x_noisy.rows()) = c_in * x_noisy.col(i);
        input(x_noisy.rows(), i) = std::log(sigmas[i]);
    }
    Eigen::MatrixXd f = forward(input, nullptr);
    for (Eigen::Index i = 0; i < batch; ++i) {
        double s2 = sigmas[i] * sigmas[i];
        double c_skip = sd2 / (s2 + sd2);
        double c_out = sigmas[i] * cfg_.sigma_data / std::sqrt(sd2 + s2);
        d.col(i) = c_skip * x_noisy.col(i) + c_out * f.col(i);
    }
    return d;
}

double DiffusionModel::loss(const Eigen::MatrixXd& x_clean,
                            const Eigen::MatrixXd& noise,
                            const Eigen::VectorXd& sigmas,
                            Eigen::VectorXd* grad) const {
    // With EDM preconditioning the weighted denoising loss reduces to a
    // unit-weight MSE between the raw network output and
    // (x - c_skip * x_noisy) / c_out.
    const double sd2 = cfg_.sigma_data * cfg_.sigma_data;
    const Eigen::Index dim = x_clean.rows();
    const Eigen::Index batch = x_clean.cols();

    Eigen::MatrixXd input(dim + 1, batch);
    Eigen::MatrixXd target(dim, batch);
    for (Eigen::Index i = 0; i < batch; ++i) {
        double s = sigmas[i];
        double s2 = s * s;
        Eigen::VectorXd x_noisy = x_clean.col(i) + s * noise.col(i);
        double c_skip = sd2 / (s2 + sd2);
        double c_out = s * cfg_.sigma_data / std::sqrt(sd2 + s2);
        double c_in = 1.0 / std::sqrt(sd2 + s2);
        input.col(i).head(dim) = c_in * x_noisy;
        input(dim, i) = std::log(s);
        target.col(i) = (x_clean.col(i) - c_skip * x_noisy) / c_out;
    }

    std::vector<Eigen::MatrixXd> cache;
    Eigen::MatrixXd f = forward(input, grad ? &cache : nullptr);
    Eigen::MatrixXd residual = f - target;
    double value = residual.squaredNorm() / double(dim * batch);
    if (!grad) return value;

    grad->resize(Eigen::Index(param_count()));
    Eigen::MatrixXd delta = (2.0 / double(dim * batch)) * residual;

    // cache layout: a0, z0, a1, z1, ..., a_{L-1}; walk layers backwards.
    std::vector<Eigen::MatrixXd> dw(layers_.size());
    std::vector<Eigen::VectorXd> db(layers_.size());
    for (std::size_t l = layers_.size(); l-- > 0;) {
        const Eigen::MatrixXd& a_in = cache[2 * l];
        dw[l] = delta * a_in.transpose();
        db[l] = delta.rowwise().sum();
        if (l > 0) {
            Eigen::MatrixXd da = layers_[l].w.transpose() * delta;
            delta = da.cwiseProduct(silu_grad(cache[2 * l - 1]));
        }
    }
    Eigen::Index at = 0;
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        grad->segment(at, dw[l].size()) =
            Eigen::Map<const Eigen::VectorXd>(dw[l].data(), dw[l].size());
        at += dw[l].size();
        grad->segment(at, db[l].size()) = db[l];
        at += db[l].size();
    }
    return value;
}

void DiffusionModel::train(const Eigen::MatrixXd& data) {
    if (data_dim_ == 0) return;
    if (std::size_t(data.cols()) != data_dim_)
        throw std::runtime_error("training data width does not match model");
    const std::size_t n = std::size_t(data.rows());
    if (n == 0) throw std::runtime_error("empty training data");

    Eigen::MatrixXd x_all = data.transpose();  // features x rows
    Rng rng(cfg_.seed ^ 0x9e3779b97f4a7c15ULL);
    Eigen::VectorXd params = get_params();
    Eigen::VectorXd rms = Eigen::VectorXd::Zero(params.size());
    Eigen::VectorXd grad(params.size());
    const double decay = 0.99, eps = 1e-8;

    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;

    loss_curve_.clear();
    for (int epoch = 0; epoch < cfg_.epochs; ++epoch) {
        rng.shuffle(order);
        double epoch_loss = 0.0;
        std::size_t batches = 0;
        for (std::size_t start = 0; start < n; start += std::size_t(cfg_.batch_size)) {
            std::size_t b = std::min(std::size_t(cfg_.batch_size), n - start);
            Eigen::MatrixXd x(data_dim_, b);
            Eigen::MatrixXd noise(data_dim_, b);
            Eigen::VectorXd sigmas(b);
            for (std::size_t i = 0; i < b; ++i) {
                x.col(i) = x_all.col(Eigen::Index(order[start + i]));
                for (std::size_t d = 0; d < data_dim_; ++d)
                    noise(d, i) = rng.normal();
                sigmas[i] = std::exp(cfg_.log_sigma_mean + cfg_.log_sigma_std * rng.normal());
            }
            double value = loss(x, noise, sigmas, &grad);
            if (!std::isfinite(value))
                throw std::runtime_error("non-finite training loss at epoch " +
                                         std::to_string(epoch) + ", batch " +
                                         std::to_string(batches));
            rms = decay * rms + (1.0 - decay) * grad.cwiseProduct(grad);
            params -= cfg_.learning_rate *
                      grad.cwiseQuotient((rms.cwiseSqrt().array() + eps).matrix());
            set_params(params);
            epoch_loss += value;
            ++batches;
        }
        loss_curve_.push_back(epoch_loss / double(batches));
    }
}

Eigen::MatrixXd DiffusionModel::sample(std::size_t n, std::uint64_t seed) const {
    if (data_dim_ == 0) return Eigen::MatrixXd(Eigen::Index(n), 0);
    const int steps = cfg_.sample_steps;
    const double rho = cfg_.schedule_rho;
    std::vector<double> t(steps + 1, 0.0);
    for (int i = 0; i < steps; ++i) {
        double lo = std::pow(cfg_.sigma_min, 1.0 / rho);
        double hi = std::pow(cfg_.sigma_max, 1.0 / rho);
        t[i] = std::pow(hi + double(i) / double(steps - 1) * (lo - hi), rho);
    }

    Rng rng(seed);
    Eigen::MatrixXd x(data_dim_, n);
    for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = t[0] * rng.normal();

    for (int i = 0; i < steps; ++i) {
        Eigen::VectorXd sig = Eigen::VectorXd::Constant(Eigen::Index(n), t[i]);
        Eigen::MatrixXd d_cur = (x - denoise(x, sig)) / t[i];
        double dt = t[i + 1] - t[i];
        Eigen::MatrixXd x_next = x + dt * d_cur;
        if (t[i + 1] > 0.0) {
            Eigen::VectorXd sig_next =
                Eigen::VectorXd::Constant(Eigen::Index(n), t[i + 1]);
            Eigen::MatrixXd d_next = (x_next - denoise(x_next, sig_next)) / t[i + 1];
            x += dt * 0.5 * (d_cur + d_next);
        } else {
            x = x_next;
        }
    }
    return x.transpose();
}

std::string DiffusionModel::to_json_string() const {
    nlohmann::json j;
    j["data_dim"] = data_dim_;
    j["config"] = {{"hidden_width", cfg_.hidden_width},
                   {"hidden_depth", cfg_.hidden_depth},
                   {"epochs", cfg_.epochs},
                   {"batch_size", cfg_.batch_size},
                   {"learning_rate", cfg_.learning_rate},
                   {"sigma_data", cfg_.sigma_data},
                   {"sigma_min", cfg_.sigma_min},
                   {"sigma_max", cfg_.sigma_max},
                   {"log_sigma_mean", cfg_.log_sigma_mean},
                   {"log_sigma_std", cfg_.log_sigma_std},
                   {"sample_steps", cfg_.sample_steps},
                   {"schedule_rho", cfg_.schedule_rho},
                   {"seed", cfg_.seed}};
    j["loss_curve"] = loss_curve_;
    j["layers"] = nlohmann::json::array();
    for (const auto& l : layers_) {
        std::vector<double> w(l.w.data(), l.w.data() + l.w.size());
        std::vector<double> b(l.b.data(), l.b.data() + l.b.size());
        j["layers"].push_back(
            {{"rows", l.w.rows()}, {"cols", l.w.cols()}, {"w", w}, {"b", b}});
    }
    return j.dump();
}

DiffusionModel DiffusionModel::from_json_string(const std::string& text) {
    nlohmann::json j = nlohmann::json::parse(text);
    DiffusionModel model;
    model.data_dim_ = j.at("data_dim").get<std::size_t>();
    const auto& jc = j.at("config");
    model.cfg_.hidden_width = jc.at("hidden_width").get<int>();
    model.cfg_.hidden_depth = jc.at("hidden_depth").get<int>();
    model.cfg_.epochs = jc.at("epochs").get<int>();
    model.cfg_.batch_size = jc.at("batch_size").get<int>();
    model.cfg_.learning_rate = jc.at("learning_rate").get<double>();
    model.cfg_.sigma_data = jc.at("sigma_data").get<double>();
    model.cfg_.sigma_min = jc.at("sigma_min").get<double>();
    model.cfg_.sigma_max = jc.at("sigma_max").get<double>();
    model.cfg_.log_sigma_mean = jc.at("log_sigma_mean").get<double>();
    model.cfg_.log_sigma_std = jc.at("log_sigma_std").get<double>();
    model.cfg_.sample_steps = jc.at("sample_steps").get<int>();
    model.cfg_.schedule_rho = jc.at("schedule_rho").get<double>();
    model.cfg_.seed = jc.at("seed").get<std::uint64_t>();
    model.loss_curve_ = j.at("loss_curve").get<std::vector<double>>();
    for (const auto& jl : j.at("layers")) {
        Layer layer;
        auto rows = jl.at("rows").get<Eigen::Index>();
        auto cols = jl.at("cols").get<Eigen::Index>();
        auto w = jl.at("w").get<std::vector<double>>();
        auto b = jl.at("b").get<std::vector<double>>();
        layer.w = Eigen::Map<const Eigen::MatrixXd>(w.data(), rows, cols);
        layer.b = Eigen::Map<const Eigen::VectorXd>(b.data(), Eigen::Index(b.size()));
        model.layers_.push_back(std::move(layer));
    }
    return model;
}

// --- GeneratorModel --------------------------------------------------------

Table GeneratorModel::generate(std::size_t n, std::uint64_t seed) const {
    return encoder.decode(model.sample(n, seed));
}

void GeneratorModel::save(const std::string& path) const {
    nlohmann::json j;
    j["encoder"] = nlohmann::json::parse(encoder.to_json_string());
    j["model"] = nlohmann::json::parse(model.to_json_string());
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write file: " + path);
    out << j.dump() << '\n';
}

GeneratorModel GeneratorModel::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open file: " + path);
    nlohmann::json j = nlohmann::json::parse(in);
    GeneratorModel g;
    g.encoder = Encoder::from_json_string(j.at("encoder").dump());
    g.model = DiffusionModel::from_json_string(j.at("model").dump());
    return g;
}

GeneratorModel train_generator(const Table& table, const DiffusionConfig& cfg) {
    GeneratorModel g;
    g.encoder = Encoder::fit(table);
    Eigen::MatrixXd x = g.encoder.encode(table);
    g.model = DiffusionModel(g.encoder.dim(), cfg);
    g.model.train(x);
    return g;
}

Table independent_sample(const Table& table, std::size_t n, std::uint64_t seed) {
    if (table.row_count() == 0) throw std::runtime_error("empty source table");
    Rng rng(seed);
    Table out(table.metas());
    for (std::size_t c = 0; c < table.column_count(); ++c) {
        const Column& src = table.column(c);
        Column& dst = out.column_mut(c);
        for (std::size_t i = 0; i < n; ++i) {
            std::size_t r = rng.below(table.row_count());
            if (src.is_missing(r)) {
                dst.push_missing();
            } else if (src.kind() == ColumnKind::Numeric) {
                dst.push_number(src.number(r));
            } else if (src.kind() == ColumnKind::Timestamp) {
                dst.push_timestamp(src.timestamp(r));
            } else {
                dst.push_category(src.category(r));
            }
        }
    }
    out.set_row_count(n);
    return out;
}

}  // namespace tabkg
