#include "elicit/io.hpp"

#include "elicit/errors.hpp"
#include "json_codec.hpp"
#include "text_format.hpp"

#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

namespace elicit {
namespace {

template <class F>
void for_each_record(std::istream& in, const char* what, F&& f) {
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            const Json j = Json::parse(line);
            if (!j.is_object()) throw FormatError("record is not an object");
            f(j);
        } catch (const Json::exception& e) {
            throw FormatError(std::string(what) + ": line " + std::to_string(lineno) + ": " + e.what());
        } catch (const FormatError& e) {
            throw FormatError(std::string(what) + ": line " + std::to_string(lineno) + ": " + e.what());
        }
    }
}

} // namespace

std::vector<DocumentRecord> read_document_records(std::istream& in) {
    std::vector<DocumentRecord> out;
    for_each_record(in, "documents", [&](const Json& j) {
        DocumentRecord r;
        r.id = j.at("id").get<std::string>();
        r.keywords = j.at("keywords").get<std::vector<std::string>>();
        r.target = j.at("target").get<double>();
        r.category = j.at("category").get<std::string>();
        out.push_back(std::move(r));
    });
    return out;
}

void write_document_records(std::ostream& out, const std::vector<DocumentRecord>& records) {
    for (const auto& r : records)
        out << Json{{"id", r.id}, {"keywords", r.keywords}, {"target", r.target}, {"category", r.category}}.dump()
            << '\n';
}

AuxCorpus read_aux_corpus(std::istream& in) {
    std::vector<std::vector<std::string>> docs;
    for_each_record(in, "aux corpus", [&](const Json& j) {
        (void)j.at("id");
        docs.push_back(j.at("keywords").get<std::vector<std::string>>());
    });
    try {
        return AuxCorpus::from_documents(std::move(docs));
    } catch (const ContractError& e) {
        throw FormatError(std::string("aux corpus: ") + e.what());
    }
}

void write_aux_corpus(std::ostream& out, const AuxCorpus& aux) {
    for (std::size_t i = 0; i < aux.docs.size(); ++i)
        out << Json{{"id", "aux" + std::to_string(i)}, {"keywords", aux.docs[i]}}.dump() << '\n';
}

void write_dataset(std::ostream& out, const Dataset& d) {
    Json columns = Json::array();
    for (Eigen::Index j = 0; j < d.X.cols(); ++j) {
        std::vector<Eigen::Index> rows;
        for (Eigen::Index i = 0; i < d.X.rows(); ++i)
            if (d.X(i, j) != 0.0) rows.push_back(i);
        columns.push_back(rows);
    }
    const Json j{{"format", "elicit-dataset"},
                 {"version", 1},
                 {"feature_names", d.feature_names},
                 {"ids", d.ids},
                 {"categories", d.categories},
                 {"y", std::vector<double>(d.y.data(), d.y.data() + d.y.size())},
                 {"columns", columns}};
    out << j.dump() << '\n';
}

Dataset read_dataset(std::istream& in) {
    std::stringstream buf;
    buf << in.rdbuf();
    const Json j = parse_record(buf.str(), "dataset");
    check_header(j, "elicit-dataset", 1);
    try {
        Dataset d;
        d.feature_names = j.at("feature_names").get<std::vector<std::string>>();
        d.ids = j.at("ids").get<std::vector<std::string>>();
        d.categories = j.at("categories").get<std::vector<std::string>>();
        const auto y = j.at("y").get<std::vector<double>>();
        const auto& cols = j.at("columns");
        const auto n = static_cast<Eigen::Index>(y.size());
        if (cols.size() != d.feature_names.size()) throw FormatError("dataset: column count mismatch");
        d.y = Eigen::Map<const Eigen::VectorXd>(y.data(), n);
        d.X = Eigen::MatrixXd::Zero(n, static_cast<Eigen::Index>(cols.size()));
        for (std::size_t c = 0; c < cols.size(); ++c)
            for (const auto& row : cols[c]) {
                const auto i = row.get<Eigen::Index>();
                if (i < 0 || i >= n) throw FormatError("dataset: row index out of range");
                d.X(i, static_cast<Eigen::Index>(c)) = 1.0;
            }
        d.validate();
        return d;
    } catch (const Json::exception& e) {
        throw FormatError(std::string("dataset: corrupt record (") + e.what() + ")");
    } catch (const ContractError& e) {
        throw FormatError(std::string("dataset: ") + e.what());
    }
}

void write_descriptors(std::ostream& out, const DescriptorMatrix& z) {
    out << "feature";
    for (std::size_t c = 0; c < z.num_columns(); ++c) out << ',' << c;
    out << '\n';
    for (std::size_t j = 0; j < z.num_features(); ++j) {
        out << csv_field(z.feature_names[j]);
        for (std::size_t c = 0; c < z.num_columns(); ++c)
            out << ',' << format_double(z.Z(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(c)));
        out << '\n';
    }
}

DescriptorMatrix read_descriptors(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw FormatError("descriptors: empty file");
    const auto header = split_csv_line(line);
    if (header.size() < 2 || header[0] != "feature") throw FormatError("descriptors: bad header");
    for (std::size_t c = 1; c < header.size(); ++c)
        if (header[c] != std::to_string(c - 1)) throw FormatError("descriptors: cluster ids must be 0..n-1");
    const std::size_t nc = header.size() - 1;
    std::vector<std::vector<double>> rows;
    DescriptorMatrix z;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        const auto fields = split_csv_line(line);
        if (fields.size() != nc + 1)
            throw FormatError("descriptors: line " + std::to_string(lineno) + " has the wrong field count");
        z.feature_names.push_back(fields[0]);
        std::vector<double> row;
        for (std::size_t c = 1; c < fields.size(); ++c) row.push_back(parse_double(fields[c]));
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw FormatError("descriptors: no rows");
    z.Z.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(nc));
    for (std::size_t j = 0; j < rows.size(); ++j)
        for (std::size_t c = 0; c < nc; ++c) z.Z(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(c)) = rows[j][c];
    return z;
}

void write_chain(std::ostream& out, const PosteriorChain& chain) {
    const std::size_t k = chain.num_features();
    out << "# seed=" << chain.seed << '\n';
    out << "# config=" << Json(chain.config).dump() << '\n';
    for (std::size_t j = 0; j < k; ++j) out << "w_" << (j + 1) << ',';
    out << "a,xi,sigma\n";
    for (const auto& s : chain.samples) {
        for (Eigen::Index j = 0; j < s.w.size(); ++j) out << format_double(s.w(j)) << ',';
        out << format_double(s.a) << ',' << format_double(s.xi) << ',' << format_double(s.sigma) << '\n';
    }
}

PosteriorChain read_chain(std::istream& in) {
    PosteriorChain chain;
    std::string line;
    bool have_seed = false, have_config = false;
    while (in.peek() == '#' && std::getline(in, line)) {
        if (line.rfind("# seed=", 0) == 0) {
            chain.seed = parse_uint(std::string_view(line).substr(7));
            have_seed = true;
        } else if (line.rfind("# config=", 0) == 0) {
            try {
                chain.config = parse_record(std::string_view(line).substr(9), "chain config").get<SamplerConfig>();
            } catch (const Json::exception& e) {
                throw FormatError(std::string("chain: bad config (") + e.what() + ")");
            }
            have_config = true;
        }
    }
    if (!have_seed || !have_config) throw FormatError("chain: missing seed or config metadata");
    chain.burn_in = chain.config.burn_in;
    if (!std::getline(in, line)) throw FormatError("chain: missing header");
    const auto header = split_csv_line(line);
    if (header.size() < 3 || header[header.size() - 3] != "a" || header[header.size() - 2] != "xi" ||
        header.back() != "sigma")
        throw FormatError("chain: header must end with a,xi,sigma");
    const std::size_t k = header.size() - 3;
    for (std::size_t j = 0; j < k; ++j)
        if (header[j] != "w_" + std::to_string(j + 1)) throw FormatError("chain: bad weight column names");
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto f = split_csv_line(line);
        if (f.size() != k + 3) throw FormatError("chain: row has the wrong field count");
        ModelParams p;
        p.w.resize(static_cast<Eigen::Index>(k));
        for (std::size_t j = 0; j < k; ++j) p.w(static_cast<Eigen::Index>(j)) = parse_double(f[j]);
        p.a = parse_double(f[k]);
        p.xi = parse_double(f[k + 1]);
        p.sigma = parse_double(f[k + 2]);
        chain.samples.push_back(std::move(p));
    }
    return chain;
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void write_file(const std::filesystem::path& path, const std::string& contents) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("cannot write " + path.string());
    out << contents;
    if (!out) throw FormatError("write failed for " + path.string());
}

} // namespace elicit
