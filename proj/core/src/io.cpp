#include "maat/io.hpp"

#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <sstream>

namespace maat {

namespace fs = std::filesystem;
using nlohmann::json;

std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string to_csv(const std::vector<std::string>& header, const Matrix& values) {
    std::ostringstream os;
    for (std::size_t i = 0; i < header.size(); ++i) os << (i ? "," : "") << header[i];
    os << "\n";
    for (Index r = 0; r < values.rows(); ++r) {
        for (Index c = 0; c < values.cols(); ++c)
            os << (c ? "," : "") << format_double(values(r, c));
        os << "\n";
    }
    return os.str();
}

void write_text_file(const fs::path& path, const std::string& content) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorKind::missing_file, "cannot open for writing: " + path.string());
    out << content;
}

std::string read_text_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::missing_file, "cannot open: " + path.string());
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

CsvTable read_csv(const fs::path& path) {
    const std::string content = read_text_file(path);
    std::istringstream in(content);
    std::string line;
    if (!std::getline(in, line))
        throw Error(ErrorKind::malformed_file, "empty csv: " + path.string());
    CsvTable table;
    {
        std::istringstream hs(line);
        std::string tok;
        while (std::getline(hs, tok, ',')) table.header.push_back(tok);
    }
    std::vector<std::vector<double>> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<double> row;
        std::istringstream ls(line);
        std::string tok;
        while (std::getline(ls, tok, ',')) {
            try {
                row.push_back(std::stod(tok));
            } catch (const std::exception&) {
                throw Error(ErrorKind::malformed_file,
                            "bad number '" + tok + "' in " + path.string());
            }
        }
        if (row.size() != table.header.size())
            throw Error(ErrorKind::malformed_file, "ragged csv row in " + path.string());
        rows.push_back(std::move(row));
    }
    table.values.resize(static_cast<Index>(rows.size()),
                        static_cast<Index>(table.header.size()));
    for (std::size_t r = 0; r < rows.size(); ++r)
        for (std::size_t c = 0; c < rows[r].size(); ++c)
            table.values(static_cast<Index>(r), static_cast<Index>(c)) = rows[r][c];
    return table;
}

namespace {

std::vector<std::string> split_header(const std::string& prefix, Index count,
                                      const std::string& lead = "t") {
    std::vector<std::string> h{lead};
    for (Index i = 0; i < count; ++i) h.push_back(prefix + std::to_string(i + 1));
    return h;
}

Matrix with_time_column(const Vector& t, const Matrix& values) {
    Matrix m(values.rows(), values.cols() + 1);
    m.col(0) = t;
    m.rightCols(values.cols()) = values;
    return m;
}

void save_split(const SplitData& split, const fs::path& dir) {
    write_text_file(dir / "signals.csv",
                    to_csv(split_header("y_", split.signals.cols()),
                           with_time_column(split.times, split.signals)));
    write_text_file(dir / "snapshots.csv",
                    to_csv(split_header("x_", split.snapshots.cols()),
                           with_time_column(split.snapshot_times, split.snapshots)));
    write_text_file(dir / "truth.csv",
                    to_csv(split_header("x_", split.truth.cols()),
                           with_time_column(split.times, split.truth)));
}

SplitData load_split(const fs::path& dir) {
    SplitData split;
    const CsvTable signals = read_csv(dir / "signals.csv");
    const CsvTable snapshots = read_csv(dir / "snapshots.csv");
    const CsvTable truth = read_csv(dir / "truth.csv");
    split.times = signals.values.col(0);
    split.signals = signals.values.rightCols(signals.values.cols() - 1);
    split.snapshot_times = snapshots.values.col(0);
    split.snapshots = snapshots.values.rightCols(snapshots.values.cols() - 1);
    split.truth = truth.values.rightCols(truth.values.cols() - 1);
    for (Index i = 0; i < split.snapshot_times.size(); ++i) {
        Index found = -1;
        for (Index j = 0; j < split.times.size(); ++j)
            if (split.times[j] == split.snapshot_times[i]) {
                found = j;
                break;
            }
        if (found < 0)
            throw Error(ErrorKind::malformed_file,
                        "snapshot time not on the dense grid: " + dir.string());
        split.snapshot_indices.push_back(found);
    }
    split.validate();
    return split;
}

json matrix_to_json(const Matrix& m) {
    json rows = json::array();
    for (Index r = 0; r < m.rows(); ++r) {
        json row = json::array();
        for (Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
        rows.push_back(row);
    }
    return rows;
}

Matrix matrix_from_json(const json& rows) {
    const Index r = static_cast<Index>(rows.size());
    const Index c = r > 0 ? static_cast<Index>(rows[0].size()) : 0;
    Matrix m(r, c);
    for (Index i = 0; i < r; ++i)
        for (Index j = 0; j < c; ++j) m(i, j) = rows[i][j].get<double>();
    return m;
}

} // namespace

void save_dataset(const TimeSeriesDataset& dataset, const fs::path& dir) {
    fs::create_directories(dir);
    json meta;
    meta["system"] = dataset.system_name;
    meta["seed"] = dataset.config.seed;
    meta["noise"] = to_string(dataset.noise_kind);
    meta["noise_scale"] = {{"train", dataset.noise_scale_train},
                           {"val", dataset.noise_scale_val},
                           {"test", dataset.noise_scale_test}};
    meta["operator"] = {{"kind", dataset.config.operator_kind},
                        {"H", matrix_to_json(dataset.observation.H)},
                        {"labels", dataset.observation.channel_labels}};
    std::vector<double> params(dataset.system.params.data(),
                               dataset.system.params.data() + dataset.system.params.size());
    meta["parameters"] = {{"names", dataset.system.param_names}, {"values", params}};
    meta["state_names"] = dataset.system.state_names;
    meta["generation"] = {{"dt", dataset.config.dt},
                          {"n_train", dataset.config.n_train},
                          {"n_val", dataset.config.n_val},
                          {"n_test", dataset.config.n_test},
                          {"param_jitter", dataset.config.param_jitter},
                          {"ic_jitter", dataset.config.ic_jitter},
                          {"snapshot_stride", dataset.config.snapshot_stride},
                          {"noisy_snapshots", dataset.config.noisy_snapshots},
                          {"ar1_alpha", dataset.config.noise.ar1_alpha},
                          {"student_nu", dataset.config.noise.student_nu}};
    meta["version"] = kVersion;
    write_text_file(dir / "meta.json", meta.dump(2) + "\n");
    save_split(dataset.train, dir / "train");
    save_split(dataset.val, dir / "val");
    save_split(dataset.test, dir / "test");
}

TimeSeriesDataset load_dataset(const fs::path& dir) {
    if (!fs::exists(dir / "meta.json"))
        throw Error(ErrorKind::missing_file, "no dataset at " + dir.string());
    json meta;
    try {
        meta = json::parse(read_text_file(dir / "meta.json"));
    } catch (const json::exception& e) {
        throw Error(ErrorKind::malformed_file, "meta.json: " + std::string(e.what()));
    }

    TimeSeriesDataset ds;
    ds.system_name = meta.at("system").get<std::string>();
    const auto pvals = meta.at("parameters").at("values").get<std::vector<double>>();
    Vector params(static_cast<Index>(pvals.size()));
    for (std::size_t i = 0; i < pvals.size(); ++i) params[static_cast<Index>(i)] = pvals[i];
    ds.system = make_system(ds.system_name).with_params(params);
    ds.noise_kind = noise_kind_from_string(meta.at("noise").get<std::string>());

    ds.observation.H = matrix_from_json(meta.at("operator").at("H"));
    ds.observation.channel_labels =
        meta.at("operator").at("labels").get<std::vector<std::string>>();
    ds.observation.validate();

    const auto& gen = meta.at("generation");
    ds.config.dt = gen.at("dt").get<double>();
    ds.config.n_train = gen.at("n_train").get<long>();
    ds.config.n_val = gen.at("n_val").get<long>();
    ds.config.n_test = gen.at("n_test").get<long>();
    ds.config.param_jitter = gen.at("param_jitter").get<double>();
    ds.config.ic_jitter = gen.at("ic_jitter").get<double>();
    ds.config.snapshot_stride = gen.at("snapshot_stride").get<int>();
    ds.config.noisy_snapshots = gen.at("noisy_snapshots").get<bool>();
    ds.config.noise.ar1_alpha = gen.at("ar1_alpha").get<double>();
    ds.config.noise.student_nu = gen.at("student_nu").get<int>();
    ds.config.noise.kind = ds.noise_kind;
    ds.config.seed = meta.at("seed").get<std::uint64_t>();
    ds.config.operator_kind = meta.at("operator").at("kind").get<std::string>();
    ds.noise_scale_train = meta.at("noise_scale").at("train").get<double>();
    ds.noise_scale_val = meta.at("noise_scale").at("val").get<double>();
    ds.noise_scale_test = meta.at("noise_scale").at("test").get<double>();

    ds.train = load_split(dir / "train");
    ds.val = load_split(dir / "val");
    ds.test = load_split(dir / "test");
    return ds;
}

void save_kernel_model(const KernelModel& model, const fs::path& path) {
    model.validate();
    std::ostringstream os;
    os << "maat kernel model v1\n";
    os << "centers " << model.centers.size() << "\n";
    for (Index i = 0; i < model.centers.size(); ++i)
        os << format_double(model.centers[i]) << "\n";
    os << "sigma " << model.length_scales.dim() << "\n";
    for (Index d = 0; d < model.length_scales.dim(); ++d)
        os << format_double(model.length_scales.sigma[d]) << "\n";
    os << "coeffs " << model.coeffs.rows() << " " << model.coeffs.cols() << "\n";
    for (Index r = 0; r < model.coeffs.rows(); ++r) {
        for (Index c = 0; c < model.coeffs.cols(); ++c)
            os << (c ? " " : "") << format_double(model.coeffs(r, c));
        os << "\n";
    }
    write_text_file(path, os.str());
}

KernelModel load_kernel_model(const fs::path& path) {
    std::istringstream in(read_text_file(path));
    std::string line;
    std::getline(in, line);
    if (line != "maat kernel model v1")
        throw Error(ErrorKind::malformed_file, "not a kernel model file: " + path.string());
    KernelModel model;
    std::string word;
    Index n = 0, d = 0, rows = 0, cols = 0;
    in >> word >> n;
    if (word != "centers" || n <= 0)
        throw Error(ErrorKind::malformed_file, "bad centers block in " + path.string());
    model.centers.resize(n);
    for (Index i = 0; i < n; ++i) in >> model.centers[i];
    in >> word >> d;
    if (word != "sigma" || d <= 0)
        throw Error(ErrorKind::malformed_file, "bad sigma block in " + path.string());
    model.length_scales.sigma.resize(d);
    for (Index i = 0; i < d; ++i) in >> model.length_scales.sigma[i];
    in >> word >> rows >> cols;
    if (word != "coeffs" || rows != n || cols != d)
        throw Error(ErrorKind::malformed_file, "bad coeffs block in " + path.string());
    model.coeffs.resize(rows, cols);
    for (Index r = 0; r < rows; ++r)
        for (Index c = 0; c < cols; ++c) in >> model.coeffs(r, c);
    if (!in) throw Error(ErrorKind::malformed_file, "truncated model file: " + path.string());
    model.validate();
    return model;
}

void save_estimate(const std::string& method, const Vector& times, const Matrix& states,
                   const Matrix& derivs, const fs::path& path) {
    std::vector<std::string> header{"t"};
    for (Index d = 0; d < states.cols(); ++d) header.push_back("xhat_" + std::to_string(d + 1));
    for (Index d = 0; d < derivs.cols(); ++d) header.push_back("dxhat_" + std::to_string(d + 1));
    Matrix m(times.size(), 1 + states.cols() + derivs.cols());
    m.col(0) = times;
    m.middleCols(1, states.cols()) = states;
    m.rightCols(derivs.cols()) = derivs;
    std::ostringstream os;
    os << "# method: " << method << "\n" << to_csv(header, m);
    write_text_file(path, os.str());
}

Estimate load_estimate(const fs::path& path) {
    std::string content = read_text_file(path);
    Estimate est;
    if (content.rfind("# method: ", 0) == 0) {
        const auto eol = content.find('\n');
        est.method = content.substr(10, eol - 10);
        content = content.substr(eol + 1);
    }
    const fs::path tmp; // parse from the string directly
    std::istringstream in(content);
    std::string line;
    std::getline(in, line);
    std::vector<std::string> header;
    {
        std::istringstream hs(line);
        std::string tok;
        while (std::getline(hs, tok, ',')) header.push_back(tok);
    }
    Index d = 0;
    for (const auto& h : header)
        if (h.rfind("xhat_", 0) == 0) ++d;
    if (d == 0 || header.size() != static_cast<std::size_t>(1 + 2 * d))
        throw Error(ErrorKind::malformed_file, "not an estimate file: " + path.string());
    std::vector<std::vector<double>> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<double> row;
        std::istringstream ls(line);
        std::string tok;
        while (std::getline(ls, tok, ',')) row.push_back(std::stod(tok));
        if (row.size() != header.size())
            throw Error(ErrorKind::malformed_file, "ragged estimate row in " + path.string());
        rows.push_back(std::move(row));
    }
    const Index n = static_cast<Index>(rows.size());
    est.times.resize(n);
    est.states.resize(n, d);
    est.derivs.resize(n, d);
    for (Index r = 0; r < n; ++r) {
        est.times[r] = rows[static_cast<std::size_t>(r)][0];
        for (Index c = 0; c < d; ++c) {
            est.states(r, c) = rows[static_cast<std::size_t>(r)][static_cast<std::size_t>(1 + c)];
            est.derivs(r, c) =
                rows[static_cast<std::size_t>(r)][static_cast<std::size_t>(1 + d + c)];
        }
    }
    return est;
}

void save_sparse_model(const SparseDynamicsModel& model,
                       const std::vector<std::string>& state_names, const fs::path& path) {
    std::ostringstream os;
    os << "maat sparse model v1\n";
    os << "dimension " << model.xi.cols() << "\n";
    os << "max_degree " << model.library.max_degree << "\n";
    os << "include_bias " << (model.library.include_bias ? 1 : 0) << "\n";
    os << "features " << model.library.feature_count() << "\n";
    for (const auto& e : model.library.exponents) {
        for (std::size_t i = 0; i < e.size(); ++i) os << (i ? " " : "") << e[i];
        os << "\n";
    }
    os << "xi " << model.xi.rows() << " " << model.xi.cols() << "\n";
    for (Index r = 0; r < model.xi.rows(); ++r) {
        for (Index c = 0; c < model.xi.cols(); ++c)
            os << (c ? " " : "") << format_double(model.xi(r, c));
        os << "\n";
    }
    os << "equations\n" << format_equations(model, state_names);
    write_text_file(path, os.str());
}

SparseDynamicsModel load_sparse_model(const fs::path& path) {
    std::istringstream in(read_text_file(path));
    std::string line, word;
    std::getline(in, line);
    if (line != "maat sparse model v1")
        throw Error(ErrorKind::malformed_file, "not a sparse model file: " + path.string());
    SparseDynamicsModel model;
    Index dim = 0, feats = 0, rows = 0, cols = 0;
    int bias = 1;
    in >> word >> dim;
    in >> word >> model.library.max_degree;
    in >> word >> bias;
    model.library.include_bias = bias != 0;
    in >> word >> feats;
    if (!in || dim <= 0 || feats <= 0)
        throw Error(ErrorKind::malformed_file, "bad sparse model header: " + path.string());
    model.library.exponents.assign(static_cast<std::size_t>(feats), std::vector<int>(dim));
    for (auto& e : model.library.exponents)
        for (auto& v : e) in >> v;
    in >> word >> rows >> cols;
    if (word != "xi" || rows != feats || cols != dim)
        throw Error(ErrorKind::malformed_file, "bad xi block in " + path.string());
    model.xi.resize(rows, cols);
    for (Index r = 0; r < rows; ++r)
        for (Index c = 0; c < cols; ++c) in >> model.xi(r, c);
    if (!in) throw Error(ErrorKind::malformed_file, "truncated sparse model: " + path.string());
    return model;
}

std::string rows_to_csv(const std::vector<ResultRow>& rows) {
    std::ostringstream os;
    os << "dataset,noise,method,seed,state_mse,deriv_mse,rollout_mse,negative_points\n";
    for (const auto& r : rows)
        os << r.dataset << "," << r.noise << "," << r.method << "," << r.seed << ","
           << format_double(r.state_mse) << "," << format_double(r.deriv_mse) << ","
           << format_double(r.rollout_mse) << "," << r.negative_points << "\n";
    return os.str();
}

std::vector<ResultRow> rows_from_csv_text(const std::string& content) {
    std::istringstream in(content);
    std::string line;
    if (!std::getline(in, line) ||
        line != "dataset,noise,method,seed,state_mse,deriv_mse,rollout_mse,negative_points")
        throw Error(ErrorKind::malformed_file, "not a result-rows table");
    std::vector<ResultRow> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string tok;
        std::vector<std::string> f;
        while (std::getline(ls, tok, ',')) f.push_back(tok);
        if (f.size() != 8) throw Error(ErrorKind::malformed_file, "ragged result row");
        ResultRow r;
        r.dataset = f[0];
        r.noise = f[1];
        r.method = f[2];
        try {
            r.seed = std::stoull(f[3]);
            r.state_mse = std::stod(f[4]);
            r.deriv_mse = std::stod(f[5]);
            r.rollout_mse = std::stod(f[6]);
            r.negative_points = std::stol(f[7]);
        } catch (const std::exception&) {
            throw Error(ErrorKind::malformed_file, "bad number in result row: " + line);
        }
        rows.push_back(std::move(r));
    }
    return rows;
}

std::string summary_to_csv(const std::vector<std::string>& group_keys,
                           const std::vector<SummaryRow>& summary) {
    std::ostringstream os;
    for (const auto& k : group_keys) os << k << ",";
    os << "metric,geomean,ci_lo,ci_hi,n_used,n_excluded\n";
    for (const auto& s : summary) {
        for (const auto& g : s.group) os << g << ",";
        os << s.metric << "," << format_double(s.stats.geomean) << ","
           << format_double(s.stats.lo) << "," << format_double(s.stats.hi) << ","
           << s.stats.n_used << "," << s.stats.n_excluded << "\n";
    }
    return os.str();
}

std::string rows_to_long_csv(const std::vector<ResultRow>& rows) {
    std::ostringstream os;
    os << "dataset,noise,method,seed,metric,value\n";
    for (const auto& r : rows) {
        os << r.dataset << "," << r.noise << "," << r.method << "," << r.seed << ",state_mse,"
           << format_double(r.state_mse) << "\n";
        os << r.dataset << "," << r.noise << "," << r.method << "," << r.seed << ",deriv_mse,"
           << format_double(r.deriv_mse) << "\n";
        os << r.dataset << "," << r.noise << "," << r.method << "," << r.seed << ",rollout_mse,"
           << format_double(r.rollout_mse) << "\n";
    }
    return os.str();
}

std::string timing_to_csv(const std::vector<ResultRow>& rows) {
    std::ostringstream os;
    os << "dataset,noise,method,seed,wall_time_s\n";
    for (const auto& r : rows)
        os << r.dataset << "," << r.noise << "," << r.method << "," << r.seed << ","
           << format_double(r.wall_time_s) << "\n";
    return os.str();
}

void write_experiment_output(const ExperimentOutput& output,
                             const std::vector<std::string>& group_keys, const fs::path& dir) {
    fs::create_directories(dir);
    write_text_file(dir / "rows.csv", rows_to_csv(output.rows));
    write_text_file(dir / "summary.csv", summary_to_csv(group_keys, output.summary));
    write_text_file(dir / "long.csv", rows_to_long_csv(output.rows));
    // wall-clock timings are inherently non-deterministic and live apart
    // from the reproducible tables
    write_text_file(dir / "timing.csv", timing_to_csv(output.rows));
    for (const auto& [name, content] : output.tables)
        write_text_file(dir / (name + ".csv"), content);
}

void write_manifest(const fs::path& path, const std::string& command,
                    const std::string& config_json) {
    json manifest;
    manifest["command"] = command;
    try {
        manifest["config"] = json::parse(config_json);
    } catch (const json::exception&) {
        manifest["config"] = config_json;
    }
    manifest["version"] = kVersion;
    write_text_file(path, manifest.dump(2) + "\n");
}

} // namespace maat
