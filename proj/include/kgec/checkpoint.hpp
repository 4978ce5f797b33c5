#pragma once

// Binary checkpoint:
//   "KGEC1" | n u64 | m u64 | d u64 | precision u32 (4 = float32, 8 = float64)
//   | entity_re | entity_im | relation_re | relation_im      (row-major)
// All integers and floats little-endian. Vocabularies live next to the
// checkpoint and are referenced from a JSON sidecar "<checkpoint>.vocab.json".

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "kgec/data.hpp"
#include "kgec/model.hpp"

namespace kgec {

enum class Precision : std::uint32_t { Float32 = 4, Float64 = 8 };

inline constexpr std::array<char, 5> kCheckpointMagic = {'K', 'G', 'E', 'C', '1'};

class CheckpointError : public std::runtime_error {
    using std::runtime_error::runtime_error;
};

namespace detail {

template <typename U>
void put_le(std::ostream& out, U value) {
    std::array<char, sizeof(U)> bytes;
    for (std::size_t i = 0; i < sizeof(U); ++i) bytes[i] = static_cast<char>((value >> (8 * i)) & 0xff);
    out.write(bytes.data(), bytes.size());
}

template <typename U>
U get_le(std::istream& in) {
    std::array<unsigned char, sizeof(U)> bytes;
    if (!in.read(reinterpret_cast<char*>(bytes.data()), bytes.size())) throw CheckpointError("truncated checkpoint");
    U value = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) value |= static_cast<U>(bytes[i]) << (8 * i);
    return value;
}

inline void put_block(std::ostream& out, const Matrix& m, Precision p) {
    for (double x : m.data()) {
        if (p == Precision::Float64)
            put_le(out, std::bit_cast<std::uint64_t>(x));
        else
            put_le(out, std::bit_cast<std::uint32_t>(static_cast<float>(x)));
    }
}

inline void get_block(std::istream& in, Matrix& m, Precision p) {
    for (double& x : m.data()) {
        if (p == Precision::Float64)
            x = std::bit_cast<double>(get_le<std::uint64_t>(in));
        else
            x = std::bit_cast<float>(get_le<std::uint32_t>(in));
    }
}

}  // namespace detail

inline void write_checkpoint(std::ostream& out, const ModelParams& params, Precision precision) {
    out.write(kCheckpointMagic.data(), kCheckpointMagic.size());
    detail::put_le<std::uint64_t>(out, params.num_entities());
    detail::put_le<std::uint64_t>(out, params.num_relations());
    detail::put_le<std::uint64_t>(out, params.dim());
    detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(precision));
    for (const Matrix* m : {&params.entity_re, &params.entity_im, &params.relation_re, &params.relation_im})
        detail::put_block(out, *m, precision);
}

struct CheckpointHeader {
    std::uint64_t num_entities = 0;
    std::uint64_t num_relations = 0;
    std::uint64_t dim = 0;
    Precision precision = Precision::Float64;
};

inline CheckpointHeader read_checkpoint_header(std::istream& in) {
    std::array<char, kCheckpointMagic.size()> magic{};
    if (!in.read(magic.data(), magic.size()) || magic != kCheckpointMagic)
        throw CheckpointError("not a KGEC1 checkpoint");
    CheckpointHeader h;
    h.num_entities = detail::get_le<std::uint64_t>(in);
    h.num_relations = detail::get_le<std::uint64_t>(in);
    h.dim = detail::get_le<std::uint64_t>(in);
    auto p = detail::get_le<std::uint32_t>(in);
    if (p != 4 && p != 8) throw CheckpointError("unknown precision flag " + std::to_string(p));
    h.precision = static_cast<Precision>(p);
    return h;
}

inline ModelParams read_checkpoint(std::istream& in, CheckpointHeader* header_out = nullptr) {
    auto h = read_checkpoint_header(in);
    ModelParams params(h.num_entities, h.num_relations, h.dim);
    for (Matrix* m : {&params.entity_re, &params.entity_im, &params.relation_re, &params.relation_im})
        detail::get_block(in, *m, h.precision);
    if (in.peek() != std::char_traits<char>::eof()) throw CheckpointError("trailing bytes after checkpoint");
    if (header_out) *header_out = h;
    return params;
}

inline std::filesystem::path vocab_sidecar_path(const std::filesystem::path& checkpoint) {
    return checkpoint.string() + ".vocab.json";
}

// Writes the checkpoint, both vocabulary dumps and the sidecar pointing at them.
inline void save_checkpoint(const std::filesystem::path& path, const ModelParams& params, const Vocab& vocab,
                            Precision precision) {
    if (vocab.entities.size() != params.num_entities() || vocab.relations.size() != params.num_relations())
        throw CheckpointError("vocabulary size does not match parameters");
    {
        std::ofstream out(path, std::ios::binary);
        if (!out) throw CheckpointError("cannot write '" + path.string() + "'");
        write_checkpoint(out, params, precision);
    }
    auto ent_path = std::filesystem::path(path.string() + ".entities.txt");
    auto rel_path = std::filesystem::path(path.string() + ".relations.txt");
    write_names(ent_path, vocab.entities);
    write_names(rel_path, vocab.relations);
    nlohmann::json sidecar = {
        {"entity_vocab", ent_path.filename().string()},
        {"relation_vocab", rel_path.filename().string()},
    };
    std::ofstream(vocab_sidecar_path(path)) << sidecar.dump(2) << '\n';
}

struct LoadedCheckpoint {
    ModelParams params;
    Vocab vocab;
    CheckpointHeader header;
};

inline LoadedCheckpoint load_checkpoint(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) throw CheckpointError("checkpoint '" + path.string() + "' does not exist");
    LoadedCheckpoint out;
    {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw CheckpointError("cannot open '" + path.string() + "'");
        out.params = read_checkpoint(in, &out.header);
    }
    auto sidecar_path = vocab_sidecar_path(path);
    std::ifstream sidecar_in(sidecar_path);
    if (!sidecar_in) throw CheckpointError("missing vocabulary sidecar '" + sidecar_path.string() + "'");
    auto sidecar = nlohmann::json::parse(sidecar_in);
    auto base = path.parent_path();
    out.vocab.entities = read_names(base / sidecar.at("entity_vocab").get<std::string>());
    out.vocab.relations = read_names(base / sidecar.at("relation_vocab").get<std::string>());
    if (out.vocab.entities.size() != out.params.num_entities() ||
        out.vocab.relations.size() != out.params.num_relations())
        throw CheckpointError("vocabulary dumps do not match checkpoint shape");
    return out;
}

}  // namespace kgec
