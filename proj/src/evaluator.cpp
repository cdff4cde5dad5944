#include "tabkg/evaluator.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "tabkg/rng.hpp"
#include "tabkg/validator.hpp"

namespace tabkg {

namespace {

void require_same_schema(const Table& a, const Table& b) {
    if (a.column_count() != b.column_count())
        throw std::runtime_error("schema mismatch: different column counts");
    for (std::size_t c = 0; c < a.column_count(); ++c) {
        if (a.metas()[c].name != b.metas()[c].name ||
            a.metas()[c].kind != b.metas()[c].kind)
            throw std::runtime_error("schema mismatch at column: " + a.metas()[c].name);
    }
}

std::vector<double> numeric_values(const Column& col, std::size_t rows) {
    std::vector<double> out;
    for (std::size_t r = 0; r < rows; ++r)
        if (!col.is_missing(r)) out.push_back(col.numeric_value(r));
    return out;
}

double ks_statistic(std::vector<double> a, std::vector<double> b) {
    if (a.empty() || b.empty()) return 1.0;
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    double ks = 0.0;
    std::size_t i = 0, j = 0;
    while (i < a.size() && j < b.size()) {
        double v = std::min(a[i], b[j]);
        while (i < a.size() && a[i] <= v) ++i;
        while (j < b.size() && b[j] <= v) ++j;
        ks = std::max(ks, std::abs(double(i) / double(a.size()) -
                                   double(j) / double(b.size())));
    }
    return ks;
}

std::map<std::string, double> category_freqs(const Column& col, std::size_t rows) {
    std::map<std::string, double> freq;
    std::size_t n = 0;
    for (std::size_t r = 0; r < rows; ++r) {
        if (col.is_missing(r)) continue;
        ++freq[col.category(r)];
        ++n;
    }
    for (auto& [k, v] : freq) v /= double(n);
    return freq;
}

double total_variation(const std::map<std::string, double>& p,
                       const std::map<std::string, double>& q) {
    std::set<std::string> keys;
    for (const auto& [k, v] : p) keys.insert(k);
    for (const auto& [k, v] : q) keys.insert(k);
    double tv = 0.0;
    for (const auto& k : keys) {
        auto ip = p.find(k), iq = q.find(k);
        tv += std::abs((ip == p.end() ? 0.0 : ip->second) -
                       (iq == q.end() ? 0.0 : iq->second));
    }
    return 0.5 * tv;
}

double pearson(const Column& a, const Column& b, std::size_t rows) {
    double sa = 0, sb = 0, saa = 0, sbb = 0, sab = 0;
    std::size_t n = 0;
    for (std::size_t r = 0; r < rows; ++r) {
        if (a.is_missing(r) || b.is_missing(r)) continue;
        double x = a.numeric_value(r), y = b.numeric_value(r);
        sa += x;
        sb += y;
        saa += x * x;
        sbb += y * y;
        sab += x * y;
        ++n;
    }
    if (n < 2) return 0.0;
    double cov = sab / n - (sa / n) * (sb / n);
    double va = saa / n - (sa / n) * (sa / n);
    double vb = sbb / n - (sb / n) * (sb / n);
    if (va <= 0 || vb <= 0) return 0.0;
    return cov / std::sqrt(va * vb);
}

double cramers_v(const Column& a, const Column& b, std::size_t rows) {
    std::map<std::string, std::map<std::string, double>> joint;
    std::map<std::string, double> ma, mb;
    double n = 0;
    for (std::size_t r = 0; r < rows; ++r) {
        if (a.is_missing(r) || b.is_missing(r)) continue;
        joint[a.category(r)][b.category(r)] += 1;
        ma[a.category(r)] += 1;
        mb[b.category(r)] += 1;
        n += 1;
    }
    if (n == 0 || ma.size() < 2 || mb.size() < 2) return 0.0;
    double chi2 = 0.0;
    for (const auto& [ka, va] : ma) {
        for (const auto& [kb, vb] : mb) {
            double expected = va * vb / n;
            double observed = 0.0;
            auto it = joint.find(ka);
            if (it != joint.end()) {
                auto jt = it->second.find(kb);
                if (jt != it->second.end()) observed = jt->second;
            }
            chi2 += (observed - expected) * (observed - expected) / expected;
        }
    }
    double denom = n * double(std::min(ma.size(), mb.size()) - 1);
    return std::sqrt(chi2 / denom);
}

// Correlation ratio eta: between-group over total variance of the
// numeric column grouped by the categorical one.
double correlation_ratio(const Column& cat, const Column& num, std::size_t rows) {
    std::map<std::string, std::pair<double, double>> groups;  // sum, count
    double sum = 0, sum_sq = 0, n = 0;
    for (std::size_t r = 0; r < rows; ++r) {
        if (cat.is_missing(r) || num.is_missing(r)) continue;
        double v = num.numeric_value(r);
        auto& g = groups[cat.category(r)];
        g.first += v;
        g.second += 1;
        sum += v;
        sum_sq += v * v;
        n += 1;
    }
    if (n < 2) return 0.0;
    double mean = sum / n;
    double total_var = sum_sq / n - mean * mean;
    if (total_var <= 0) return 0.0;
    double between = 0.0;
    for (const auto& [k, g] : groups) {
        double gm = g.first / g.second;
        between += g.second * (gm - mean) * (gm - mean);
    }
    return std::sqrt(between / n / total_var);
}

double association(const Table& t, std::size_t i, std::size_t j) {
    const Column& a = t.column(i);
    const Column& b = t.column(j);
    bool a_cat = a.kind() == ColumnKind::Categorical;
    bool b_cat = b.kind() == ColumnKind::Categorical;
    if (a_cat && b_cat) return cramers_v(a, b, t.row_count());
    if (!a_cat && !b_cat) return pearson(a, b, t.row_count());
    return a_cat ? correlation_ratio(a, b, t.row_count())
                 : correlation_ratio(b, a, t.row_count());
}

std::map<std::string, std::string> fit_modal(const Column& src, const Column& tgt,
                                             std::size_t rows) {
    std::map<std::string, std::map<std::string, std::size_t>> counts;
    for (std::size_t r = 0; r < rows; ++r) {
        if (src.is_missing(r) || tgt.is_missing(r)) continue;
        ++counts[src.category(r)][tgt.category(r)];
    }
    std::map<std::string, std::string> modal;
    for (const auto& [s, targets] : counts) {
        std::size_t best = 0;
        for (const auto& [t, c] : targets) {
            if (c > best) {
                best = c;
                modal[s] = t;
            }
        }
    }
    return modal;
}

std::string edge_label(const Edge& e) {
    return to_string(e.kind) + ":" + e.source + "->" + e.target;
}

// Decile cut points fitted on the real column; values map to bins
// 0..9 by upper_bound over the interior quantiles.
std::vector<double> decile_cuts(const Column& col, std::size_t rows) {
    std::vector<double> v = numeric_values(col, rows);
    std::sort(v.begin(), v.end());
    std::vector<double> cuts;
    for (int q = 1; q < 10 && !v.empty(); ++q) {
        std::size_t idx = std::min(v.size() - 1, q * v.size() / 10);
        cuts.push_back(v[idx]);
    }
    return cuts;
}

std::string discretize(const Column& col, std::size_t r,
                       const std::vector<double>* cuts) {
    if (col.is_missing(r)) return "\x1e";
    if (col.kind() == ColumnKind::Categorical) return col.category(r);
    double v = col.numeric_value(r);
    std::size_t bin =
        std::size_t(std::upper_bound(cuts->begin(), cuts->end(), v) - cuts->begin());
    return "b" + std::to_string(bin);
}

double jensen_shannon_divergence(const std::map<std::string, double>& p,
                                 const std::map<std::string, double>& q) {
    std::set<std::string> keys;
    for (const auto& [k, v] : p) keys.insert(k);
    for (const auto& [k, v] : q) keys.insert(k);
    double jsd = 0.0;
    for (const auto& k : keys) {
        auto ip = p.find(k), iq = q.find(k);
        double pv = ip == p.end() ? 0.0 : ip->second;
        double qv = iq == q.end() ? 0.0 : iq->second;
        double m = 0.5 * (pv + qv);
        if (pv > 0) jsd += 0.5 * pv * std::log2(pv / m);
        if (qv > 0) jsd += 0.5 * qv * std::log2(qv / m);
    }
    return std::min(1.0, std::max(0.0, jsd));
}

// --- classifier plumbing ---------------------------------------------------

// Standardized-numeric + one-hot feature map, shared by dcr/c2st/tstr.
struct FeatureMap {
    struct Col {
        std::string name;
        bool categorical = false;
        double mean = 0, stddev = 1;
        std::vector<std::string> categories;
        std::size_t offset = 0, width = 0;
    };
    std::vector<Col> cols;
    std::size_t dim = 0;

    static FeatureMap fit(const std::vector<const Table*>& tables,
                          const std::set<std::string>& exclude) {
        FeatureMap fm;
        const Table& first = *tables.front();
        for (std::size_t c = 0; c < first.column_count(); ++c) {
            const ColumnMeta& meta = first.metas()[c];
            if (exclude.count(meta.name)) continue;
            Col col;
            col.name = meta.name;
            col.offset = fm.dim;
            if (meta.kind == ColumnKind::Categorical) {
                col.categorical = true;
                std::set<std::string> values;
                for (const Table* t : tables) {
                    const Column& tc = t->column(meta.name);
                    for (std::size_t r = 0; r < t->row_count(); ++r)
                        if (!tc.is_missing(r)) values.insert(tc.category(r));
                }
                col.categories.assign(values.begin(), values.end());
                col.width = col.categories.size() > 1 ? col.categories.size() : 0;
            } else {
                double sum = 0, sum_sq = 0, n = 0;
                for (const Table* t : tables) {
                    const Column& tc = t->column(meta.name);
                    for (std::size_t r = 0; r < t->row_count(); ++r) {
                        if (tc.is_missing(r)) continue;
                        double v = tc.numeric_value(r);
                        sum += v;
                        sum_sq += v * v;
                        n += 1;
                    }
                }
                if (n > 0) {
                    col.mean = sum / n;
                    double var = sum_sq / n - col.mean * col.mean;
                    col.stddev = var > 1e-24 ? std::sqrt(var) : 0.0;
                }
                col.width = col.stddev > 0 ? 1 : 0;
            }
            fm.dim += col.width;
            fm.cols.push_back(std::move(col));
        }
        return fm;
    }

    Eigen::MatrixXd encode(const Table& t) const {
        Eigen::MatrixXd x = Eigen::MatrixXd::Zero(t.row_count(), dim);
        for (const auto& col : cols) {
            if (col.width == 0) continue;
            const Column& tc = t.column(col.name);
            for (std::size_t r = 0; r < t.row_count(); ++r) {
                if (tc.is_missing(r)) continue;
                if (col.categorical) {
                    auto it = std::lower_bound(col.categories.begin(),
                                               col.categories.end(), tc.category(r));
                    if (it != col.categories.end() && *it == tc.category(r))
                        x(r, col.offset + std::size_t(it - col.categories.begin())) = 1.0;
                } else {
                    x(r, col.offset) = (tc.numeric_value(r) - col.mean) / col.stddev;
                }
            }
        }
        return x;
    }
};

// Ridge-regularized logistic regression fitted by IRLS; deterministic.
struct Logistic {
    Eigen::VectorXd w;
    double b = 0.0;

    void fit(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, double lambda = 1e-2) {
        const Eigen::Index n = x.rows(), d = x.cols();
        Eigen::MatrixXd xa(n, d + 1);
        xa << x, Eigen::VectorXd::Ones(n);
        Eigen::VectorXd beta = Eigen::VectorXd::Zero(d + 1);
        for (int iter = 0; iter < 30; ++iter) {
            Eigen::VectorXd z = xa * beta;
            Eigen::VectorXd p = (1.0 / (1.0 + (-z.array()).exp())).matrix();
            Eigen::VectorXd wv = (p.array() * (1.0 - p.array()) + 1e-6).matrix();
            Eigen::MatrixXd h = xa.transpose() * wv.asDiagonal() * xa;
            h.diagonal().array() += lambda * double(n);
            Eigen::VectorXd g = xa.transpose() * (y - p) - lambda * double(n) * beta;
            Eigen::VectorXd step = h.ldlt().solve(g);
            beta += step;
            if (step.norm() < 1e-10) break;
        }
        w = beta.head(d);
        b = beta[d];
    }

    Eigen::VectorXd scores(const Eigen::MatrixXd& x) const {
        Eigen::VectorXd z = x * w;
        return (1.0 / (1.0 + (-(z.array() + b)).exp())).matrix();
    }
};

// Mann-Whitney AUC with midrank tie handling.
double auc_score(const Eigen::VectorXd& scores, const Eigen::VectorXd& labels) {
    const Eigen::Index n = scores.size();
    std::vector<Eigen::Index> idx(n);
    for (Eigen::Index i = 0; i < n; ++i) idx[i] = i;
    std::sort(idx.begin(), idx.end(),
              [&](Eigen::Index a, Eigen::Index b) { return scores[a] < scores[b]; });
    std::vector<double> rank(n);
    Eigen::Index i = 0;
    while (i < n) {
        Eigen::Index j = i;
        while (j + 1 < n && scores[idx[j + 1]] == scores[idx[i]]) ++j;
        double mid = 0.5 * double(i + j) + 1.0;
        for (Eigen::Index k = i; k <= j; ++k) rank[idx[k]] = mid;
        i = j + 1;
    }
    double pos = 0, rank_sum = 0;
    for (Eigen::Index k = 0; k < n; ++k) {
        if (labels[k] > 0.5) {
            pos += 1;
            rank_sum += rank[k];
        }
    }
    double neg = double(n) - pos;
    if (pos == 0 || neg == 0) return 0.5;
    return (rank_sum - pos * (pos + 1) / 2.0) / (pos * neg);
}

double macro_f1_binary(const Eigen::VectorXd& scores, const Eigen::VectorXd& labels) {
    double f1_sum = 0.0;
    for (int cls = 0; cls < 2; ++cls) {
        double tp = 0, fp = 0, fn = 0;
        for (Eigen::Index i = 0; i < scores.size(); ++i) {
            bool pred = (scores[i] >= 0.5) == (cls == 1);
            bool truth = (labels[i] > 0.5) == (cls == 1);
            if (pred && truth) tp += 1;
            if (pred && !truth) fp += 1;
            if (!pred && truth) fn += 1;
        }
        double denom = 2 * tp + fp + fn;
        f1_sum += denom > 0 ? 2 * tp / denom : 0.0;
    }
    return f1_sum / 2.0;
}

}  // namespace

// --- metric implementations ------------------------------------------------

double density_score(const Table& real, const Table& synth,
                     std::map<std::string, double>* per_column) {
    require_same_schema(real, synth);
    double sum = 0.0;
    for (std::size_t c = 0; c < real.column_count(); ++c) {
        const ColumnMeta& meta = real.metas()[c];
        double score;
        if (meta.kind == ColumnKind::Categorical) {
            score = 100.0 * (1.0 - total_variation(
                                       category_freqs(real.column(c), real.row_count()),
                                       category_freqs(synth.column(c), synth.row_count())));
        } else {
            score = 100.0 * (1.0 - ks_statistic(
                                       numeric_values(real.column(c), real.row_count()),
                                       numeric_values(synth.column(c), synth.row_count())));
        }
        if (per_column) (*per_column)[meta.name] = score;
        sum += score;
    }
    return sum / double(real.column_count());
}

double correlation_score(const Table& real, const Table& synth,
                         std::map<std::string, double>* per_pair) {
    require_same_schema(real, synth);
    if (real.column_count() < 2)
        throw std::runtime_error("correlation_score needs at least two columns");
    double sum = 0.0;
    std::size_t pairs = 0;
    for (std::size_t i = 0; i < real.column_count(); ++i) {
        for (std::size_t j = i + 1; j < real.column_count(); ++j) {
            double delta = std::abs(association(real, i, j) - association(synth, i, j));
            double score = std::min(100.0, std::max(0.0, 100.0 * (1.0 - delta / 2.0)));
            if (per_pair)
                (*per_pair)[real.metas()[i].name + "|" + real.metas()[j].name] = score;
            sum += delta;
            ++pairs;
        }
    }
    double score = 100.0 * (1.0 - sum / double(pairs) / 2.0);
    return std::min(100.0, std::max(0.0, score));
}

std::optional<double> hcs(const Table& synth, const Graph& graph, const Table& real,
                          std::map<std::string, double>* per_edge) {
    double sum = 0.0;
    std::size_t edges = 0;
    for (const auto& e : graph.edges()) {
        if (e.kind != EdgeKind::Hierarchical || e.is_self_constraint()) continue;
        auto modal = fit_modal(real.column(e.source), real.column(e.target),
                               real.row_count());
        std::size_t ok = 0, total = 0;
        const Column& src = synth.column(e.source);
        const Column& tgt = synth.column(e.target);
        for (std::size_t r = 0; r < synth.row_count(); ++r) {
            if (src.is_missing(r) || tgt.is_missing(r)) continue;
            ++total;
            auto it = modal.find(src.category(r));
            if (it != modal.end() && it->second == tgt.category(r)) ++ok;
        }
        double score = total ? 100.0 * double(ok) / double(total) : 0.0;
        if (per_edge) (*per_edge)[edge_label(e)] = score;
        sum += score;
        ++edges;
    }
    if (edges == 0) return std::nullopt;
    return sum / double(edges);
}

std::optional<double> mdi(const Table& synth, const Graph& graph,
                          std::map<std::string, double>* per_edge) {
    double sum = 0.0;
    std::size_t edges = 0;
    for (const auto& e : graph.edges()) {
        if (e.kind != EdgeKind::Mathematical && e.kind != EdgeKind::Temporal) continue;
        double score = 100.0 * validate_edge(e, synth);
        if (per_edge) (*per_edge)[edge_label(e)] = score;
        sum += score;
        ++edges;
    }
    if (edges == 0) return std::nullopt;
    return sum / double(edges);
}

std::optional<double> dsi(const Table& real, const Table& synth, const Graph& graph,
                          std::map<std::string, double>* per_edge) {
    require_same_schema(real, synth);
    double sum = 0.0;
    std::size_t edges = 0;
    std::set<std::string> seen;
    for (const auto& e : graph.edges()) {
        if (!seen.insert(e.source + "\x1f" + e.target).second) continue;
        const Column& rs = real.column(e.source);
        const Column& rt = real.column(e.target);
        std::vector<double> cuts_s, cuts_t;
        const std::vector<double>* ps = nullptr;
        const std::vector<double>* pt = nullptr;
        if (rs.kind() != ColumnKind::Categorical) {
            cuts_s = decile_cuts(rs, real.row_count());
            ps = &cuts_s;
        }
        if (rt.kind() != ColumnKind::Categorical) {
            cuts_t = decile_cuts(rt, real.row_count());
            pt = &cuts_t;
        }
        auto joint = [&](const Table& t) {
            std::map<std::string, double> dist;
            const Column& a = t.column(e.source);
            const Column& b = t.column(e.target);
            for (std::size_t r = 0; r < t.row_count(); ++r)
                dist[discretize(a, r, ps) + "\x1f" + discretize(b, r, pt)] += 1;
            for (auto& [k, v] : dist) v /= double(t.row_count());
            return dist;
        };
        double score = 100.0 * (1.0 - jensen_shannon_divergence(joint(real), joint(synth)));
        if (per_edge) (*per_edge)[edge_label(e)] = score;
        sum += score;
        ++edges;
    }
    if (edges == 0) return std::nullopt;
    return sum / double(edges);
}

double dcr(const Table& train, const Table& holdout, const Table& synth) {
    require_same_schema(train, synth);
    require_same_schema(train, holdout);
    if (holdout.row_count() == 0) throw std::runtime_error("empty holdout table");

    // Standardization stats come from train only.
    const std::size_t p = train.column_count();
    std::vector<double> mean(p, 0.0), stddev(p, 0.0);
    for (std::size_t c = 0; c < p; ++c) {
        if (train.metas()[c].kind == ColumnKind::Categorical) continue;
        std::vector<double> v = numeric_values(train.column(c), train.row_count());
        if (v.empty()) continue;
        double s = 0, ss = 0;
        for (double x : v) {
            s += x;
            ss += x * x;
        }
        mean[c] = s / double(v.size());
        double var = ss / double(v.size()) - mean[c] * mean[c];
        stddev[c] = var > 0 ? std::sqrt(var) : 0.0;
    }

    auto row_distance = [&](const Table& a, std::size_t ra, const Table& b,
                            std::size_t rb) {
        double d = 0.0;
        for (std::size_t c = 0; c < p; ++c) {
            const Column& ca = a.column(c);
            const Column& cb = b.column(c);
            bool ma = ca.is_missing(ra), mb = cb.is_missing(rb);
            if (ma || mb) {
                d += (ma && mb) ? 0.0 : 1.0;
            } else if (a.metas()[c].kind == ColumnKind::Categorical) {
                d += ca.category(ra) == cb.category(rb) ? 0.0 : 1.0;
            } else if (stddev[c] > 0) {
                double delta =
                    std::abs(ca.numeric_value(ra) - cb.numeric_value(rb)) / stddev[c];
                d += std::min(1.0, delta);
            } else {
                d += ca.numeric_value(ra) == cb.numeric_value(rb) ? 0.0 : 1.0;
            }
        }
        return d / double(p);
    };

    auto nearest = [&](const Table& pool, std::size_t r) {
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < pool.row_count(); ++i)
            best = std::min(best, row_distance(synth, r, pool, i));
        return best;
    };

    double closer = 0.0;
    for (std::size_t r = 0; r < synth.row_count(); ++r) {
        double dt = nearest(train, r);
        double dh = nearest(holdout, r);
        if (std::abs(dt - dh) <= 1e-12)
            closer += 0.5;
        else if (dt < dh)
            closer += 1.0;
    }
    return synth.row_count() ? 100.0 * closer / double(synth.row_count()) : 0.0;
}

double c2st(const Table& real, const Table& synth, std::uint64_t seed) {
    if (real.row_count() == 0 || synth.row_count() == 0)
        throw std::runtime_error("c2st requires nonempty tables");
    require_same_schema(real, synth);

    FeatureMap fm = FeatureMap::fit({&real, &synth}, {});
    Eigen::MatrixXd xr = fm.encode(real);
    Eigen::MatrixXd xs = fm.encode(synth);
    const Eigen::Index n = xr.rows() + xs.rows();
    Eigen::MatrixXd x(n, fm.dim);
    x << xr, xs;
    Eigen::VectorXd y(n);
    y.head(xr.rows()).setOnes();
    y.tail(xs.rows()).setZero();

    std::vector<std::size_t> order(static_cast<std::size_t>(n));
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng rng(seed);
    rng.shuffle(order);

    const int folds = 5;
    double auc_sum = 0.0;
    for (int f = 0; f < folds; ++f) {
        std::vector<std::size_t> train_idx, test_idx;
        for (std::size_t i = 0; i < order.size(); ++i) {
            if (int(i % folds) == f)
                test_idx.push_back(order[i]);
            else
                train_idx.push_back(order[i]);
        }
        Eigen::MatrixXd xt(train_idx.size(), fm.dim), xv(test_idx.size(), fm.dim);
        Eigen::VectorXd yt(train_idx.size()), yv(test_idx.size());
        for (std::size_t i = 0; i < train_idx.size(); ++i) {
            xt.row(i) = x.row(Eigen::Index(train_idx[i]));
            yt[i] = y[Eigen::Index(train_idx[i])];
        }
        for (std::size_t i = 0; i < test_idx.size(); ++i) {
            xv.row(i) = x.row(Eigen::Index(test_idx[i]));
            yv[i] = y[Eigen::Index(test_idx[i])];
        }
        Logistic clf;
        clf.fit(xt, yt);
        auc_sum += auc_score(clf.scores(xv), yv);
    }
    double auc = auc_sum / folds;
    return 100.0 * std::max(0.0, 1.0 - 2.0 * (auc - 0.5));
}

TstrResult tstr(const Table& synth_train, const Table& real_test,
                const std::string& label, std::uint64_t seed) {
    (void)seed;  // the fit is deterministic; kept for interface stability
    const Column& train_label = synth_train.column(label);
    const Column& test_label = real_test.column(label);
    if (train_label.kind() != ColumnKind::Categorical)
        throw std::runtime_error("tstr label must be categorical: " + label);

    std::set<std::string> class_set;
    for (std::size_t r = 0; r < synth_train.row_count(); ++r)
        if (!train_label.is_missing(r)) class_set.insert(train_label.category(r));
    if (class_set.size() < 2)
        throw std::runtime_error("tstr training data has a single class");
    for (std::size_t r = 0; r < real_test.row_count(); ++r)
        if (!test_label.is_missing(r) && !class_set.count(test_label.category(r)))
            throw std::runtime_error("class absent from training data: " +
                                     test_label.category(r));
    std::vector<std::string> classes(class_set.begin(), class_set.end());

    FeatureMap fm = FeatureMap::fit({&synth_train}, {label});
    Eigen::MatrixXd xt = fm.encode(synth_train);
    Eigen::MatrixXd xv = fm.encode(real_test);

    auto labels_for = [&](const Column& col, std::size_t rows, const std::string& cls) {
        Eigen::VectorXd y(rows);
        for (std::size_t r = 0; r < rows; ++r)
            y[Eigen::Index(r)] = (!col.is_missing(r) && col.category(r) == cls) ? 1.0 : 0.0;
        return y;
    };

    TstrResult result;
    if (classes.size() == 2) {
        Eigen::VectorXd yt = labels_for(train_label, synth_train.row_count(), classes[1]);
        Eigen::VectorXd yv = labels_for(test_label, real_test.row_count(), classes[1]);
        Logistic clf;
        clf.fit(xt, yt);
        Eigen::VectorXd s = clf.scores(xv);
        result.auc = auc_score(s, yv);
        result.macro_f1 = macro_f1_binary(s, yv);
        return result;
    }

    // One-vs-rest: macro AUC, argmax predictions for macro F1.
    Eigen::MatrixXd score(real_test.row_count(), classes.size());
    double auc_sum = 0.0;
    for (std::size_t k = 0; k < classes.size(); ++k) {
        Logistic clf;
        clf.fit(xt, labels_for(train_label, synth_train.row_count(), classes[k]));
        score.col(Eigen::Index(k)) = clf.scores(xv);
        auc_sum += auc_score(score.col(Eigen::Index(k)),
                             labels_for(test_label, real_test.row_count(), classes[k]));
    }
    result.auc = auc_sum / double(classes.size());

    double f1_sum = 0.0;
    for (std::size_t k = 0; k < classes.size(); ++k) {
        double tp = 0, fp = 0, fn = 0;
        for (std::size_t r = 0; r < real_test.row_count(); ++r) {
            Eigen::Index best;
            score.row(Eigen::Index(r)).maxCoeff(&best);
            bool pred = std::size_t(best) == k;
            bool truth =
                !test_label.is_missing(r) && test_label.category(r) == classes[k];
            if (pred && truth) tp += 1;
            if (pred && !truth) fp += 1;
            if (!pred && truth) fn += 1;
        }
        double denom = 2 * tp + fp + fn;
        f1_sum += denom > 0 ? 2 * tp / denom : 0.0;
    }
    result.macro_f1 = f1_sum / double(classes.size());
    return result;
}

// --- report ----------------------------------------------------------------

EvalReport evaluate_all(const Table& real, const Table& synth, const Graph& graph,
                        const Table* train, const Table* holdout,
                        const std::string& label, std::uint64_t seed) {
    EvalReport report;
    report.density = density_score(real, synth, &report.density_per_column);
    report.correlation = correlation_score(real, synth, &report.correlation_per_pair);
    report.hcs = hcs(synth, graph, real, &report.hcs_per_edge);
    report.mdi = mdi(synth, graph, &report.mdi_per_edge);
    report.dsi = dsi(real, synth, graph, &report.dsi_per_edge);
    if (train && holdout && holdout->row_count() > 0)
        report.dcr = dcr(*train, *holdout, synth);
    report.c2st = c2st(real, synth, seed);
    if (!label.empty() && synth.has_column(label) && real.has_column(label))
        report.tstr = tstr(synth, real, label, seed);
    return report;
}

std::string EvalReport::to_json_string() const {
    nlohmann::json j;
    j["density"] = density;
    j["correlation"] = correlation;
    auto put = [&](const char* key, const std::optional<double>& v) {
        if (v) j[key] = *v;
    };
    put("hcs", hcs);
    put("mdi", mdi);
    put("dsi", dsi);
    put("dcr", dcr);
    put("c2st", c2st);
    if (tstr) {
        j["tstr_auc"] = tstr->auc;
        j["tstr_f1"] = tstr->macro_f1;
    }
    j["breakdown"] = {{"density_per_column", density_per_column},
                      {"correlation_per_pair", correlation_per_pair},
                      {"hcs_per_edge", hcs_per_edge},
                      {"mdi_per_edge", mdi_per_edge},
                      {"dsi_per_edge", dsi_per_edge}};
    return j.dump(2);
}

std::string EvalReport::to_text_table() const {
    std::ostringstream out;
    auto line = [&](const std::string& name, double value) {
        out << name;
        for (std::size_t i = name.size(); i < 14; ++i) out << ' ';
        char buf[32];
        std::snprintf(buf, sizeof buf, "%10.4f", value);
        out << buf << '\n';
    };
    line("density", density);
    line("correlation", correlation);
    if (hcs) line("hcs", *hcs);
    if (mdi) line("mdi", *mdi);
    if (dsi) line("dsi", *dsi);
    if (dcr) line("dcr", *dcr);
    if (c2st) line("c2st", *c2st);
    if (tstr) {
        line("tstr_auc", tstr->auc);
        line("tstr_f1", tstr->macro_f1);
    }
    return out.str();
}

void EvalReport::save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write file: " + path);
    out << to_json_string() << '\n';
}

}  // namespace tabkg
