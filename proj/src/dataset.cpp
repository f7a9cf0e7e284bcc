#include "mvdiag/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

#include "mvdiag/errors.hpp"

namespace mvdiag {

std::size_t MultiViewDataset::total_dim() const {
    std::size_t d = 0;
    for (const ViewBlock& v : views) d += v.schema.dim;
    return d;
}

std::vector<std::vector<double>> MultiViewDataset::sample_views(std::size_t n) const {
    std::vector<std::vector<double>> out;
    out.reserve(views.size());
    for (const ViewBlock& v : views) {
        const double* r = v.values.row(n);
        out.emplace_back(r, r + v.schema.dim);
    }
    return out;
}

std::vector<double> MultiViewDataset::concat_row(std::size_t n) const {
    std::vector<double> out;
    out.reserve(total_dim());
    for (const ViewBlock& v : views) {
        const double* r = v.values.row(n);
        out.insert(out.end(), r, r + v.schema.dim);
    }
    return out;
}

std::vector<ViewSchema> preset_schema(const std::string& name) {
    if (name == "tableII") {
        return {{"gray", 19},   {"texture", 74}, {"histogram", 30}, {"number", 24},
                {"intensity", 2}, {"surface", 7},  {"volume", 33}};
    }
    throw std::invalid_argument("unknown schema preset: " + name);
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            cells.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur.push_back(c);
        }
    }
    cells.push_back(cur);
    return cells;
}

double parse_double(const std::string& s, const std::string& file, std::size_t line_no) {
    double value = 0.0;
    const char* begin = s.data();
    const char* end = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(begin, end, value);
    if (ec != std::errc() || ptr != end)
        throw DataError(file + ":" + std::to_string(line_no) +
                        ": invalid numeric value '" + s + "'");
    return value;
}

struct CsvTable {
    std::vector<std::string> ids;
    Matrix values;  // rows x (cols-1)
};

CsvTable read_feature_csv(const std::filesystem::path& path, std::size_t dim) {
    std::ifstream in(path);
    if (!in) throw DataError("missing file: " + path.string());
    const std::string file = path.filename().string();

    CsvTable table;
    std::string line;
    std::size_t line_no = 0;
    if (!std::getline(in, line))
        throw DataError(file + ":1: empty file");
    ++line_no;
    auto header = split_csv_line(line);
    if (header.empty() || header[0] != "subject_id")
        throw DataError(file + ":1: header must start with 'subject_id'");
    if (header.size() != dim + 1)
        throw DataError(file + ":1: expected " + std::to_string(dim + 1) +
                        " columns, found " + std::to_string(header.size()));

    std::vector<double> flat;
    std::unordered_set<std::string> seen;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        auto cells = split_csv_line(line);
        if (cells.size() != dim + 1)
            throw DataError(file + ":" + std::to_string(line_no) + ": expected " +
                            std::to_string(dim + 1) + " columns, found " +
                            std::to_string(cells.size()));
        if (!seen.insert(cells[0]).second)
            throw DataError(file + ":" + std::to_string(line_no) +
                            ": duplicate id '" + cells[0] + "'");
        table.ids.push_back(cells[0]);
        for (std::size_t i = 1; i < cells.size(); ++i)
            flat.push_back(parse_double(cells[i], file, line_no));
    }
    table.values.rows = table.ids.size();
    table.values.cols = dim;
    table.values.data = std::move(flat);
    return table;
}

std::unordered_map<std::string, int> read_labels_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("missing file: " + path.string());
    const std::string file = path.filename().string();

    std::string line;
    std::size_t line_no = 0;
    if (!std::getline(in, line))
        throw DataError(file + ":1: empty file");
    ++line_no;
    auto header = split_csv_line(line);
    if (header.size() != 2 || header[0] != "subject_id" || header[1] != "label")
        throw DataError(file + ":1: header must be 'subject_id,label'");

    std::unordered_map<std::string, int> labels;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        auto cells = split_csv_line(line);
        if (cells.size() != 2)
            throw DataError(file + ":" + std::to_string(line_no) +
                            ": expected 2 columns");
        if (cells[1] != "0" && cells[1] != "1")
            throw DataError(file + ":" + std::to_string(line_no) +
                            ": invalid label '" + cells[1] + "' (must be 0 or 1)");
        if (!labels.emplace(cells[0], cells[1] == "1" ? 1 : 0).second)
            throw DataError(file + ":" + std::to_string(line_no) +
                            ": duplicate id '" + cells[0] + "'");
    }
    return labels;
}

MultiViewDataset load_impl(const std::filesystem::path& manifest_path,
                           bool require_labels) {
    std::ifstream in(manifest_path);
    if (!in) throw DataError("missing file: " + manifest_path.string());
    const std::filesystem::path base = manifest_path.parent_path();
    const std::string file = manifest_path.filename().string();

    struct ViewEntry {
        std::string name;
        std::size_t dim;
        std::filesystem::path csv;
    };
    std::vector<ViewEntry> entries;
    std::filesystem::path labels_csv;
    bool have_labels_line = false;

    std::string line;
    std::size_t line_no = 0;
    std::unordered_set<std::string> names;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ss(line);
        std::string kind;
        ss >> kind;
        if (kind == "view") {
            ViewEntry e;
            long long dim = 0;
            std::string csv;
            if (!(ss >> e.name >> dim >> csv) || dim <= 0)
                throw DataError(file + ":" + std::to_string(line_no) +
                                ": expected 'view <name> <dim> <csv-path>'");
            if (!names.insert(e.name).second)
                throw DataError(file + ":" + std::to_string(line_no) +
                                ": duplicate view name '" + e.name + "'");
            e.dim = static_cast<std::size_t>(dim);
            e.csv = base / csv;
            entries.push_back(std::move(e));
        } else if (kind == "labels") {
            std::string csv;
            if (!(ss >> csv))
                throw DataError(file + ":" + std::to_string(line_no) +
                                ": expected 'labels <csv-path>'");
            labels_csv = base / csv;
            have_labels_line = true;
        } else {
            throw DataError(file + ":" + std::to_string(line_no) +
                            ": unknown manifest entry '" + kind + "'");
        }
    }
    if (entries.empty())
        throw DataError(file + ": manifest declares no views");
    if (require_labels && !have_labels_line)
        throw DataError(file + ": manifest declares no labels file");

    MultiViewDataset data;
    CsvTable first = read_feature_csv(entries[0].csv, entries[0].dim);
    data.subject_ids = first.ids;
    data.views.push_back({{entries[0].name, entries[0].dim}, std::move(first.values)});
    if (data.subject_ids.empty())
        throw DataError(entries[0].csv.filename().string() + ": no data rows");

    std::unordered_map<std::string, std::size_t> order;
    for (std::size_t i = 0; i < data.subject_ids.size(); ++i)
        order[data.subject_ids[i]] = i;

    for (std::size_t v = 1; v < entries.size(); ++v) {
        CsvTable t = read_feature_csv(entries[v].csv, entries[v].dim);
        const std::string vfile = entries[v].csv.filename().string();
        if (t.ids.size() != data.subject_ids.size()) {
            // find a concrete offending id for the message
            std::unordered_set<std::string> have(t.ids.begin(), t.ids.end());
            for (const std::string& id : data.subject_ids)
                if (!have.count(id))
                    throw DataError(vfile + ": subject '" + id +
                                    "' missing (present in " +
                                    entries[0].csv.filename().string() + ")");
            throw DataError(vfile + ": subject count mismatch");
        }
        Matrix aligned(t.ids.size(), entries[v].dim);
        std::vector<bool> filled(t.ids.size(), false);
        for (std::size_t r = 0; r < t.ids.size(); ++r) {
            auto it = order.find(t.ids[r]);
            if (it == order.end())
                throw DataError(vfile + ": subject '" + t.ids[r] + "' not present in " +
                                entries[0].csv.filename().string());
            std::copy(t.values.row(r), t.values.row(r) + entries[v].dim,
                      aligned.row(it->second));
            filled[it->second] = true;
        }
        for (std::size_t r = 0; r < filled.size(); ++r)
            if (!filled[r])
                throw DataError(vfile + ": subject '" + data.subject_ids[r] +
                                "' missing");
        data.views.push_back({{entries[v].name, entries[v].dim}, std::move(aligned)});
    }

    if (have_labels_line) {
        auto labels = read_labels_csv(labels_csv);
        const std::string lfile = labels_csv.filename().string();
        data.labels.resize(data.num_samples());
        for (std::size_t i = 0; i < data.subject_ids.size(); ++i) {
            auto it = labels.find(data.subject_ids[i]);
            if (it == labels.end())
                throw DataError(lfile + ": subject '" + data.subject_ids[i] +
                                "' has no label");
            data.labels[i] = it->second;
        }
        if (labels.size() != data.num_samples())
            for (const auto& [id, lab] : labels)
                if (!order.count(id))
                    throw DataError(lfile + ": label for unknown subject '" + id + "'");
    }
    return data;
}

std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace

MultiViewDataset load_dataset(const std::filesystem::path& manifest_path) {
    return load_impl(manifest_path, true);
}

MultiViewDataset load_features(const std::filesystem::path& manifest_path) {
    return load_impl(manifest_path, false);
}

std::filesystem::path save_dataset(const MultiViewDataset& data,
                                   const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    std::ofstream manifest(dir / "manifest.txt");
    if (!manifest) throw DataError("cannot write to " + dir.string());

    for (const ViewBlock& v : data.views) {
        const std::string csv_name = v.schema.name + ".csv";
        std::ofstream out(dir / csv_name);
        if (!out) throw DataError("cannot write to " + (dir / csv_name).string());
        out << "subject_id";
        for (std::size_t f = 1; f <= v.schema.dim; ++f) out << ",f" << f;
        out << "\n";
        for (std::size_t n = 0; n < data.num_samples(); ++n) {
            out << data.subject_ids[n];
            const double* r = v.values.row(n);
            for (std::size_t f = 0; f < v.schema.dim; ++f)
                out << "," << format_double(r[f]);
            out << "\n";
        }
        manifest << "view " << v.schema.name << " " << v.schema.dim << " " << csv_name
                 << "\n";
    }
    if (data.has_labels()) {
        std::ofstream out(dir / "labels.csv");
        out << "subject_id,label\n";
        for (std::size_t n = 0; n < data.num_samples(); ++n)
            out << data.subject_ids[n] << "," << data.labels[n] << "\n";
        manifest << "labels labels.csv\n";
    }
    return dir / "manifest.txt";
}

MultiViewDataset concat_views(const MultiViewDataset& data) {
    MultiViewDataset out;
    out.subject_ids = data.subject_ids;
    out.labels = data.labels;
    Matrix all(data.num_samples(), data.total_dim());
    for (std::size_t n = 0; n < data.num_samples(); ++n) {
        double* dst = all.row(n);
        for (const ViewBlock& v : data.views) {
            const double* src = v.values.row(n);
            dst = std::copy(src, src + v.schema.dim, dst);
        }
    }
    out.views.push_back({{"all", all.cols}, std::move(all)});
    return out;
}

MultiViewDataset select_views(const MultiViewDataset& data,
                              const std::vector<std::size_t>& view_indices) {
    MultiViewDataset out;
    out.subject_ids = data.subject_ids;
    out.labels = data.labels;
    for (std::size_t v : view_indices) {
        if (v >= data.num_views())
            throw std::invalid_argument("select_views: view index out of range");
        out.views.push_back(data.views[v]);
    }
    return out;
}

MultiViewDataset select_rows(const MultiViewDataset& data,
                             const std::vector<std::size_t>& rows) {
    MultiViewDataset out;
    out.subject_ids.reserve(rows.size());
    for (std::size_t r : rows) {
        if (r >= data.num_samples())
            throw std::invalid_argument("select_rows: row index out of range");
        out.subject_ids.push_back(data.subject_ids[r]);
    }
    if (data.has_labels()) {
        out.labels.reserve(rows.size());
        for (std::size_t r : rows) out.labels.push_back(data.labels[r]);
    }
    for (const ViewBlock& v : data.views) {
        Matrix m(rows.size(), v.schema.dim);
        for (std::size_t i = 0; i < rows.size(); ++i)
            std::copy(v.values.row(rows[i]), v.values.row(rows[i]) + v.schema.dim,
                      m.row(i));
        out.views.push_back({v.schema, std::move(m)});
    }
    return out;
}

SplitResult split(const MultiViewDataset& data, double train_fraction,
                  std::uint64_t seed, bool stratified) {
    if (!(train_fraction > 0.0 && train_fraction < 1.0))
        throw std::invalid_argument("split: train_fraction must be in (0,1)");
    const std::size_t n = data.num_samples();
    if (n < 2) throw std::invalid_argument("split: need at least 2 samples");

    std::mt19937_64 rng(seed);
    std::vector<std::size_t> train_rows, test_rows;

    auto take = [&](std::vector<std::size_t>& pool) {
        std::shuffle(pool.begin(), pool.end(), rng);
        const auto want = static_cast<std::size_t>(
            std::llround(train_fraction * static_cast<double>(pool.size())));
        if (want == 0 || want == pool.size())
            throw std::invalid_argument(
                "split: fraction produces an empty train or test part");
        train_rows.insert(train_rows.end(), pool.begin(), pool.begin() + want);
        test_rows.insert(test_rows.end(), pool.begin() + want, pool.end());
    };

    if (stratified) {
        if (!data.has_labels())
            throw std::invalid_argument("split: stratified split needs labels");
        std::vector<std::size_t> neg, pos;
        for (std::size_t i = 0; i < n; ++i)
            (data.labels[i] == 1 ? pos : neg).push_back(i);
        if (neg.empty() || pos.empty())
            throw std::invalid_argument("split: need both classes for stratification");
        take(neg);
        take(pos);
    } else {
        std::vector<std::size_t> all(n);
        for (std::size_t i = 0; i < n; ++i) all[i] = i;
        take(all);
    }

    std::sort(train_rows.begin(), train_rows.end());
    std::sort(test_rows.begin(), test_rows.end());
    return {select_rows(data, train_rows), select_rows(data, test_rows)};
}

MultiViewDataset synth_generate(const SynthConfig& cfg) {
    if (cfg.n_per_class < 1)
        throw std::invalid_argument("synth_generate: n_per_class must be >= 1");
    if (cfg.schema.empty())
        throw std::invalid_argument("synth_generate: schema must have at least one view");
    if (cfg.noise_per_view.size() != cfg.schema.size())
        throw std::invalid_argument("synth_generate: need one noise scale per view");
    for (double s : cfg.noise_per_view)
        if (!(s > 0.0))
            throw std::invalid_argument("synth_generate: noise scales must be positive");
    if (cfg.class_separation < 0.0)
        throw std::invalid_argument("synth_generate: separation must be >= 0");

    std::mt19937_64 rng(cfg.seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_real_distribution<double> log_scale(std::log(0.1), std::log(10.0));

    const std::size_t n_views = cfg.schema.size();
    std::vector<std::vector<double>> direction(n_views), base(n_views), scale(n_views);
    for (std::size_t v = 0; v < n_views; ++v) {
        const std::size_t dim = cfg.schema[v].dim;
        if (dim == 0) throw std::invalid_argument("synth_generate: view dims must be > 0");
        direction[v].resize(dim);
        base[v].resize(dim);
        scale[v].resize(dim);
        double norm = 0.0;
        for (std::size_t f = 0; f < dim; ++f) {
            direction[v][f] = gauss(rng);
            norm += direction[v][f] * direction[v][f];
        }
        norm = std::sqrt(norm);
        for (std::size_t f = 0; f < dim; ++f) direction[v][f] /= norm;
        for (std::size_t f = 0; f < dim; ++f) base[v][f] = gauss(rng);
        for (std::size_t f = 0; f < dim; ++f) scale[v][f] = std::exp(log_scale(rng));
    }

    const std::size_t n = 2 * cfg.n_per_class;
    MultiViewDataset data;
    data.subject_ids.resize(n);
    data.labels.resize(n);
    for (std::size_t v = 0; v < n_views; ++v)
        data.views.push_back({cfg.schema[v], Matrix(n, cfg.schema[v].dim)});

    char idbuf[24];
    for (int cls = 0; cls < 2; ++cls) {
        const double offset = (cls == 1 ? 0.5 : -0.5) * cfg.class_separation;
        for (std::size_t i = 0; i < cfg.n_per_class; ++i) {
            const std::size_t row = static_cast<std::size_t>(cls) * cfg.n_per_class + i;
            std::snprintf(idbuf, sizeof(idbuf), "s%05zu", row);
            data.subject_ids[row] = idbuf;
            data.labels[row] = cls;
            for (std::size_t v = 0; v < n_views; ++v) {
                double* dst = data.views[v].values.row(row);
                const std::size_t dim = cfg.schema[v].dim;
                for (std::size_t f = 0; f < dim; ++f) {
                    const double raw = base[v][f] + offset * direction[v][f] +
                                       cfg.noise_per_view[v] * gauss(rng);
                    dst[f] = raw * scale[v][f];
                }
            }
        }
    }
    return data;
}

}  // namespace mvdiag
