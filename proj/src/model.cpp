#include "mglstm/model.hpp"

#include "mglstm/error.hpp"
#include "mglstm/text_io.hpp"

#include <fstream>
#include <map>
#include <sstream>

namespace mglstm {

namespace {

constexpr std::string_view kMagic = "mglstm-model";
constexpr int kVersion = 1;

std::string next_token(std::istream& in, std::string_view what)
{
    std::string tok;
    if (!(in >> tok)) throw FormatError("model file truncated while reading " + std::string(what));
    return tok;
}

void expect_key(std::istream& in, std::string_view key)
{
    const auto tok = next_token(in, key);
    if (tok != key) throw FormatError("model file: expected '" + std::string(key) + "', found '" + tok + "'");
}

}  // namespace

void save_model(std::ostream& out, const Model& m)
{
    const auto& p = m.params;
    out << kMagic << ' ' << kVersion << '\n'
        << "n_cells " << p.n_cells() << '\n'
        << "candidate " << to_string(p.candidate) << '\n'
        << "train_sigma " << format_double(m.train_sigma) << '\n'
        << "seed " << m.seed << '\n'
        << "nu " << format_double(m.nu) << '\n'
        << "scaler_min " << format_double(m.scaler.min()) << '\n'
        << "scaler_max " << format_double(m.scaler.max()) << '\n';
    const auto tensors = p.tensors();
    for (std::size_t k = 0; k < ParamTensors::kCount; ++k) {
        const Eigen::MatrixXd& a = *tensors[k];
        out << "array " << ParamTensors::kNames[k] << ' ' << a.rows() << ' ' << a.cols() << '\n';
        for (Eigen::Index r = 0; r < a.rows(); ++r) {
            for (Eigen::Index c = 0; c < a.cols(); ++c) out << (c ? " " : "") << format_double(a(r, c));
            out << '\n';
        }
    }
    out << "end\n";
}

void save_model(const std::string& path, const Model& model)
{
    std::ofstream out(path);
    if (!out) throw MissingArtifact("cannot open for writing: " + path);
    save_model(out, model);
    if (!out) throw FormatError("write failed: " + path);
}

Model load_model(std::istream& in)
{
    if (next_token(in, "magic") != kMagic) throw FormatError("not a model file");
    if (std::stoi(next_token(in, "version")) != kVersion) throw FormatError("unsupported model file version");

    Model m;
    expect_key(in, "n_cells");
    const int n = std::stoi(next_token(in, "n_cells"));
    expect_key(in, "candidate");
    m.params = LstmParams::zeros(n, candidate_from_string(next_token(in, "candidate")));
    expect_key(in, "train_sigma");
    m.train_sigma = parse_double(next_token(in, "train_sigma"));
    expect_key(in, "seed");
    m.seed = std::stoull(next_token(in, "seed"));
    expect_key(in, "nu");
    m.nu = parse_double(next_token(in, "nu"));
    expect_key(in, "scaler_min");
    const double lo = parse_double(next_token(in, "scaler_min"));
    expect_key(in, "scaler_max");
    const double hi = parse_double(next_token(in, "scaler_max"));
    m.scaler = Scaler(lo, hi);

    std::map<std::string, Eigen::MatrixXd*, std::less<>> by_name;
    const auto tensors = m.params.tensors();
    for (std::size_t k = 0; k < ParamTensors::kCount; ++k) by_name.emplace(ParamTensors::kNames[k], tensors[k]);

    std::size_t seen = 0;
    while (true) {
        const auto tok = next_token(in, "array");
        if (tok == "end") break;
        if (tok != "array") throw FormatError("model file: expected 'array' or 'end', found '" + tok + "'");
        const auto name = next_token(in, "array name");
        const auto it = by_name.find(name);
        if (it == by_name.end()) throw FormatError("model file: unknown or repeated array '" + name + "'");
        const auto rows = std::stol(next_token(in, "rows"));
        const auto cols = std::stol(next_token(in, "cols"));
        Eigen::MatrixXd& a = *it->second;
        if (rows != a.rows() || cols != a.cols())
            throw ParameterShapeError("model file: array " + name + " has wrong shape");
        for (Eigen::Index r = 0; r < rows; ++r)
            for (Eigen::Index c = 0; c < cols; ++c) a(r, c) = parse_double(next_token(in, name));
        by_name.erase(it);
        ++seen;
    }
    if (seen != ParamTensors::kCount) throw FormatError("model file: missing arrays");
    return m;
}

Model load_model(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw MissingArtifact("model not found: " + path);
    return load_model(in);
}

}  // namespace mglstm
