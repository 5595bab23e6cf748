#include "volterra_net/model_io.hpp"

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>

#include <nlohmann/json.hpp>

#include "volterra_net/errors.hpp"

namespace vnet {

namespace {

using nlohmann::json;

constexpr std::array<char, 8> kMagic = {'N', 'S', 'V', 'E', 'P', 'A', 'R', '1'};

std::uint64_t to_little(std::uint64_t v) {
    if constexpr (std::endian::native == std::endian::little) return v;
    std::uint64_t out = 0;
    for (int b = 0; b < 8; ++b) out |= ((v >> (8 * b)) & 0xffULL) << (8 * (7 - b));
    return out;
}

void write_u64(std::ofstream& out, std::uint64_t v) {
    const std::uint64_t le = to_little(v);
    out.write(reinterpret_cast<const char*>(&le), sizeof le);
}

std::uint64_t read_u64(std::ifstream& in) {
    std::uint64_t le = 0;
    in.read(reinterpret_cast<char*>(&le), sizeof le);
    return to_little(le);
}

json block_table(const ParamVector& params) {
    json blocks = json::array();
    for (const auto& b : params.blocks()) blocks.push_back({{"name", b.name}, {"offset", b.offset}, {"length", b.length}});
    return blocks;
}

void check_blocks(const json& header, const ParamVector& params) {
    const auto& blocks = header.at("blocks");
    if (blocks.size() != params.blocks().size())
        throw Error(ErrorKind::IoError, "model header block table does not match the architecture");
    for (std::size_t k = 0; k < blocks.size(); ++k) {
        const auto& expect = params.blocks()[k];
        if (blocks[k].at("name").get<std::string>() != expect.name ||
            blocks[k].at("offset").get<std::size_t>() != expect.offset ||
            blocks[k].at("length").get<std::size_t>() != expect.length)
            throw Error(ErrorKind::IoError, "model header block '" + expect.name + "' does not match");
    }
}

json latent_header(ModelKind kind, const LatentDims& dims, const ParamVector& params) {
    return {{"kind", to_string(kind)}, {"format_version", kModelFormatVersion},
            {"d", dims.d}, {"m", dims.m}, {"d_h", dims.d_h}, {"d_K", dims.d_k},
            {"n_params", params.size()}, {"blocks", block_table(params)}};
}

void write_json(const std::filesystem::path& file, const json& header) {
    std::ofstream out(file);
    if (!out) throw Error(ErrorKind::IoError, "cannot write " + file.string());
    out << header.dump(2) << '\n';
}

std::filesystem::path with_suffix(const std::filesystem::path& stem, const char* suffix) {
    return std::filesystem::path(stem.string() + suffix);
}

LatentDims read_dims(const json& h) {
    return {h.at("d").get<std::size_t>(), h.at("m").get<std::size_t>(), h.at("d_h").get<std::size_t>(),
            h.at("d_K").get<std::size_t>()};
}

template <class Model>
std::unique_ptr<PathModel> restore(Model model, const json& header, const std::vector<double>& values) {
    check_blocks(header, model.params());
    model.params().assign(values);
    return std::make_unique<Model>(std::move(model));
}

}  // namespace

void write_param_binary(const std::filesystem::path& file, std::span<const double> values) {
    std::ofstream out(file, std::ios::binary);
    if (!out) throw Error(ErrorKind::IoError, "cannot write " + file.string());
    out.write(kMagic.data(), kMagic.size());
    write_u64(out, values.size());
    for (double v : values) write_u64(out, std::bit_cast<std::uint64_t>(v));
    if (!out) throw Error(ErrorKind::IoError, "short write to " + file.string());
}

std::vector<double> read_param_binary(const std::filesystem::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw Error(ErrorKind::IoError, "cannot open " + file.string());
    std::array<char, 8> magic{};
    in.read(magic.data(), magic.size());
    if (!in || magic != kMagic) throw Error(ErrorKind::IoError, file.string() + " is not a parameter file");
    const std::uint64_t count = read_u64(in);
    std::vector<double> values(count);
    for (double& v : values) v = std::bit_cast<double>(read_u64(in));
    if (!in) throw Error(ErrorKind::IoError, "truncated parameter file " + file.string());
    return values;
}

void save_model(const NeuralSveModel& model, const std::filesystem::path& stem) {
    write_param_binary(with_suffix(stem, ".bin"), model.params().values());
    write_json(with_suffix(stem, ".json"), latent_header(ModelKind::Nsve, model.dims(), model.params()));
}

void save_model(const NeuralSdeModel& model, const std::filesystem::path& stem) {
    write_param_binary(with_suffix(stem, ".bin"), model.params().values());
    write_json(with_suffix(stem, ".json"), latent_header(ModelKind::Nsde, model.dims(), model.params()));
}

void save_model(const DeepOnetModel& model, const std::filesystem::path& stem) {
    write_param_binary(with_suffix(stem, ".bin"), model.params().values());
    const auto& cfg = model.config();
    json header = {{"kind", to_string(ModelKind::DeepOnet)},
                   {"format_version", kModelFormatVersion},
                   {"d", 1},
                   {"m", model.noise_dim()},
                   {"T", model.grid().horizon()},
                   {"dt", model.grid().dt()},
                   {"hidden_width", cfg.hidden_width},
                   {"hidden_layers", cfg.hidden_layers},
                   {"p", cfg.basis},
                   {"learning_rate", cfg.learning_rate},
                   {"output_shift", model.output_shift()},
                   {"output_scale", model.output_scale()},
                   {"n_params", model.params().size()},
                   {"blocks", block_table(model.params())}};
    write_json(with_suffix(stem, ".json"), header);
}

std::unique_ptr<PathModel> load_model(const std::filesystem::path& stem) {
    const auto header_file = with_suffix(stem, ".json");
    std::ifstream in(header_file);
    if (!in) throw Error(ErrorKind::IoError, "cannot open " + header_file.string());
    json header;
    try {
        header = json::parse(in);
    } catch (const json::exception& e) {
        throw Error(ErrorKind::IoError, header_file.string() + ": " + e.what());
    }
    if (header.value("format_version", 0) != kModelFormatVersion)
        throw Error(ErrorKind::IoError, "unsupported model format version in " + header_file.string());
    const auto values = read_param_binary(with_suffix(stem, ".bin"));

    try {
        switch (parse_model_kind(header.at("kind").get<std::string>())) {
            case ModelKind::Nsve: return restore(NeuralSveModel::init(read_dims(header), 0), header, values);
            case ModelKind::Nsde: return restore(NeuralSdeModel::init(read_dims(header), 0), header, values);
            case ModelKind::DeepOnet: {
                DeepOnetConfig cfg;
                cfg.hidden_width = header.at("hidden_width").get<std::size_t>();
                cfg.hidden_layers = header.at("hidden_layers").get<std::size_t>();
                cfg.basis = header.at("p").get<std::size_t>();
                cfg.learning_rate = header.at("learning_rate").get<double>();
                const TimeGrid grid = make_uniform_grid(header.at("T").get<double>(), header.at("dt").get<double>());
                auto model = DeepOnetModel::init(grid, header.at("m").get<std::size_t>(), cfg, 0);
                model.set_output_normalization(header.at("output_shift").get<double>(),
                                               header.at("output_scale").get<double>());
                return restore(std::move(model), header, values);
            }
        }
    } catch (const json::exception& e) {
        throw Error(ErrorKind::IoError, header_file.string() + ": " + e.what());
    }
    throw Error(ErrorKind::IoError, "unknown model kind");
}

}  // namespace vnet
