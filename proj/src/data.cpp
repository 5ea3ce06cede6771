#include "a2/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>

namespace a2 {

void SyntheticConfig::validate() const {
    if (domains < 1) throw std::invalid_argument("synthetic: domains must be >= 1");
    if (fields < 1) throw std::invalid_argument("synthetic: fields must be >= 1");
    if (vocab < 2) throw std::invalid_argument("synthetic: vocab must be >= 2");
    if (concentration <= 0.0) throw std::invalid_argument("synthetic: concentration must be > 0");
    if (shared_concentration && *shared_concentration <= 0.0)
        throw std::invalid_argument("synthetic: shared_concentration must be > 0");
    if (samples < 1) throw std::invalid_argument("synthetic: samples must be >= 1");
    if (conflicting && shared_fields_or_default() > fields)
        throw std::invalid_argument("synthetic: shared_fields exceeds fields");
}

double SyntheticTruth::logit(int domain, const std::vector<std::size_t>& values) const {
    const auto& w = weights[static_cast<std::size_t>(domain)];
    double s = bias[static_cast<std::size_t>(domain)];
    for (std::size_t f = 0; f < values.size(); ++f) s += w[f][values[f]];
    return s;
}

namespace {

std::vector<double> dirichlet(std::size_t n, double conc, std::mt19937_64& rng) {
    std::gamma_distribution<double> gamma(conc, 1.0);
    std::vector<double> p(n);
    double sum = 0.0;
    for (double& v : p) {
        v = gamma(rng);
        sum += v;
    }
    if (sum == 0.0) {  // pathological underflow: fall back to uniform
        std::fill(p.begin(), p.end(), 1.0 / static_cast<double>(n));
        return p;
    }
    for (double& v : p) v /= sum;
    return p;
}

std::size_t draw_categorical(const std::vector<double>& p, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    double r = u(rng);
    for (std::size_t i = 0; i < p.size(); ++i) {
        r -= p[i];
        if (r <= 0.0) return i;
    }
    return p.size() - 1;
}

}  // namespace

FeatureSchema synthetic_schema(const SyntheticConfig& cfg) {
    FeatureSchema s;
    const std::size_t buckets = cfg.hash_buckets ? cfg.hash_buckets : 4 * cfg.vocab;
    for (std::size_t f = 0; f < cfg.fields; ++f) {
        Field fld;
        fld.name = "f" + std::to_string(f);
        fld.role = f % 2 == 0 ? FieldRole::user : FieldRole::item;
        fld.hash_buckets = buckets;
        fld.dim = cfg.embedding_dim;
        s.fields.push_back(fld);
    }
    return s;
}

Dataset generate_synthetic(const SyntheticConfig& cfg) {
    cfg.validate();
    std::mt19937_64 rng(cfg.seed);
    const std::size_t K = cfg.domains, F = cfg.fields, V = cfg.vocab;
    const std::size_t S = cfg.conflicting ? cfg.shared_fields_or_default() : 0;

    SyntheticTruth truth;
    truth.probs.assign(K, std::vector<std::vector<double>>(F));
    truth.weights.assign(K, std::vector<std::vector<double>>(F, std::vector<double>(V, 0.0)));
    truth.bias.assign(K, 0.0);

    // Shared fields (conflicting mode): one distribution and one base weight
    // table for all domains, sign-flipped on odd domains.
    std::vector<std::vector<double>> shared_probs(S);
    std::vector<std::vector<double>> shared_w(S, std::vector<double>(V, 0.0));
    std::normal_distribution<double> wdist(0.0, cfg.weight_scale);
    const double shared_c = cfg.shared_concentration.value_or(cfg.concentration);
    for (std::size_t f = 0; f < S; ++f) {
        shared_probs[f] = dirichlet(V, shared_c, rng);
        if (cfg.weight_scale > 0.0)
            for (double& v : shared_w[f]) v = wdist(rng);
    }

    std::normal_distribution<double> bdist(0.0, cfg.bias_scale);
    for (std::size_t d = 0; d < K; ++d) {
        const double sign = d % 2 == 0 ? 1.0 : -1.0;
        for (std::size_t f = 0; f < F; ++f) {
            if (f < S) {
                truth.probs[d][f] = shared_probs[f];
                for (std::size_t v = 0; v < V; ++v)
                    truth.weights[d][f][v] = sign * shared_w[f][v];
            } else {
                truth.probs[d][f] = dirichlet(V, cfg.concentration, rng);
                if (!cfg.conflicting && cfg.weight_scale > 0.0)
                    for (double& v : truth.weights[d][f]) v = wdist(rng);
            }
        }
        truth.bias[d] = cfg.fixed_bias ? *cfg.fixed_bias
                                       : (cfg.bias_scale > 0.0 ? bdist(rng) : 0.0);
    }

    Dataset ds;
    ds.schema = synthetic_schema(cfg);
    ds.provenance = Provenance::synthetic;
    ds.records.reserve(cfg.samples);
    std::uniform_int_distribution<std::size_t> ddist(0, K - 1);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<std::size_t> values(F);
    for (std::size_t i = 0; i < cfg.samples; ++i) {
        const std::size_t d = ddist(rng);
        FeatureRecord rec;
        rec.truth_domain = static_cast<int>(d);
        rec.tokens.reserve(F);
        for (std::size_t f = 0; f < F; ++f) {
            values[f] = draw_categorical(truth.probs[d][f], rng);
            rec.tokens.push_back("v" + std::to_string(values[f]));
        }
        const double p = 1.0 / (1.0 + std::exp(-truth.logit(static_cast<int>(d), values)));
        rec.label = u(rng) < p ? 1.0 : 0.0;
        ds.records.push_back(std::move(rec));
    }
    ds.truth = std::move(truth);
    return ds;
}

namespace {

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

}  // namespace

Dataset load_csv(const std::string& path, const FeatureSchema& schema, const CsvOptions& opts) {
    schema.validate();
    std::ifstream is(path);
    if (!is) throw std::runtime_error("csv: cannot open " + path);
    std::string line;
    if (!std::getline(is, line)) throw std::runtime_error("csv: " + path + " is empty");
    const std::vector<std::string> header = split_line(line);
    auto column = [&](const std::string& name) {
        for (std::size_t i = 0; i < header.size(); ++i)
            if (header[i] == name) return i;
        throw std::runtime_error("csv: missing column '" + name + "' in " + path);
    };
    const std::size_t label_col = column(opts.label_column);
    std::vector<std::size_t> field_cols;
    for (const Field& f : schema.fields) field_cols.push_back(column(f.name));
    const bool has_truth =
        std::any_of(header.begin(), header.end(),
                    [](const std::string& h) { return h == "truth_domain"; });
    const std::size_t truth_col = has_truth ? column("truth_domain") : 0;

    Dataset ds;
    ds.schema = schema;
    ds.provenance = Provenance::csv;
    std::size_t line_no = 1;
    while (std::getline(is, line)) {
        ++line_no;
        if (line.empty()) continue;
        if (opts.max_rows && ds.records.size() >= opts.max_rows) break;
        const std::vector<std::string> cells = split_line(line);
        if (cells.size() != header.size())
            throw std::runtime_error("csv: line " + std::to_string(line_no) + " has " +
                                     std::to_string(cells.size()) + " cells, header has " +
                                     std::to_string(header.size()));
        FeatureRecord rec;
        const std::string& lab = cells[label_col];
        if (lab == "0")
            rec.label = 0.0;
        else if (lab == "1")
            rec.label = 1.0;
        else
            throw std::runtime_error("csv: line " + std::to_string(line_no) +
                                     ": label '" + lab + "' is not 0 or 1");
        for (std::size_t c : field_cols) rec.tokens.push_back(cells[c]);
        if (has_truth && !cells[truth_col].empty())
            rec.truth_domain = std::stoi(cells[truth_col]);
        ds.records.push_back(std::move(rec));
    }
    return ds;
}

void export_csv(const Dataset& ds, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("csv: cannot open " + path + " for writing");
    for (std::size_t f = 0; f < ds.schema.fields.size(); ++f)
        os << ds.schema.fields[f].name << ',';
    os << "label";
    const bool truth = ds.has_truth_domains();
    if (truth) os << ",truth_domain";
    os << '\n';
    for (const FeatureRecord& r : ds.records) {
        for (const std::string& t : r.tokens) os << t << ',';
        os << static_cast<int>(r.label);
        if (truth) os << ',' << r.truth_domain;
        os << '\n';
    }
}

void SplitSpec::validate() const {
    if (train_fraction <= 0.0 || val_fraction <= 0.0 || test_fraction <= 0.0)
        throw std::invalid_argument("split: fractions must be positive");
    if (std::abs(train_fraction + val_fraction + test_fraction - 1.0) > 1e-9)
        throw std::invalid_argument("split: fractions must sum to 1");
}

Splits split(const Dataset& ds, const SplitSpec& spec) {
    spec.validate();
    if (ds.records.empty()) throw std::invalid_argument("split: empty dataset");
    std::vector<std::size_t> order(ds.records.size());
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(spec.seed);
    std::shuffle(order.begin(), order.end(), rng);
    const std::size_t n = order.size();
    const auto n_val = static_cast<std::size_t>(std::floor(spec.val_fraction * static_cast<double>(n)));
    const auto n_test = static_cast<std::size_t>(std::floor(spec.test_fraction * static_cast<double>(n)));
    const std::size_t n_train = n - n_val - n_test;
    Splits out;
    for (Dataset* part : {&out.train, &out.val, &out.test}) {
        part->schema = ds.schema;
        part->provenance = ds.provenance;
        part->truth = ds.truth;
    }
    for (std::size_t i = 0; i < n; ++i) {
        const FeatureRecord& r = ds.records[order[i]];
        if (i < n_train)
            out.train.records.push_back(r);
        else if (i < n_train + n_val)
            out.val.records.push_back(r);
        else
            out.test.records.push_back(r);
    }
    return out;
}

}  // namespace a2
