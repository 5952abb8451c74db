#include "speakstream/model.hpp"

#include <array>
#include <cstring>
#include <fstream>
#include <sstream>

namespace speakstream::nn {

namespace {

constexpr char kMagic[4] = {'S', 'S', 'C', 'K'};
constexpr uint32_t kVersion = 1;

uint32_t crc32_table_entry(uint32_t i) {
    uint32_t c = i;
    for (int k = 0; k < 8; ++k) c = (c & 1) ? 0xEDB88320u ^ (c >> 1) : c >> 1;
    return c;
}

uint32_t crc32_update(uint32_t crc, const void* buf, size_t len) {
    static const auto table = [] {
        std::array<uint32_t, 256> t{};
        for (uint32_t i = 0; i < 256; ++i) t[i] = crc32_table_entry(i);
        return t;
    }();
    const auto* p = static_cast<const uint8_t*>(buf);
    crc ^= 0xFFFFFFFFu;
    for (size_t i = 0; i < len; ++i) crc = table[(crc ^ p[i]) & 0xFF] ^ (crc >> 8);
    return crc ^ 0xFFFFFFFFu;
}

class CheckedWriter {
public:
    explicit CheckedWriter(std::ostream& os) : os_(os) {}
    void write(const void* buf, size_t len) {
        os_.write(static_cast<const char*>(buf), static_cast<std::streamsize>(len));
        crc_ = crc32_update(crc_, buf, len);
    }
    template <typename T>
    void pod(T v) {
        static_assert(std::endian::native == std::endian::little);
        write(&v, sizeof(v));
    }
    void str(const std::string& s) {
        pod<uint32_t>(static_cast<uint32_t>(s.size()));
        write(s.data(), s.size());
    }
    uint32_t crc() const { return crc_; }

private:
    std::ostream& os_;
    uint32_t crc_ = 0;
};

class CheckedReader {
public:
    explicit CheckedReader(std::istream& is) : is_(is) {}
    void read(void* buf, size_t len) {
        is_.read(static_cast<char*>(buf), static_cast<std::streamsize>(len));
        if (!is_) throw Error(ErrorCode::IoError, "truncated checkpoint");
        crc_ = crc32_update(crc_, buf, len);
    }
    template <typename T>
    T pod() {
        static_assert(std::endian::native == std::endian::little);
        T v{};
        read(&v, sizeof(v));
        return v;
    }
    std::string str() {
        const auto len = pod<uint32_t>();
        std::string s(len, '\0');
        read(s.data(), len);
        return s;
    }
    uint32_t crc() const { return crc_; }

private:
    std::istream& is_;
    uint32_t crc_ = 0;
};

}  // namespace

void save_checkpoint(const std::string& path, const ModelConfig& cfg, Params<float>& params,
                     const std::string& metadata_json) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw Error(ErrorCode::IoError, "cannot open " + path);
    os.write(kMagic, 4);
    CheckedWriter w(os);
    w.pod<uint32_t>(kVersion);
    w.pod<uint32_t>(static_cast<uint32_t>(cfg.num_layers));
    w.pod<uint32_t>(static_cast<uint32_t>(cfg.model_dim));
    w.pod<uint32_t>(static_cast<uint32_t>(cfg.num_heads));
    w.pod<uint32_t>(static_cast<uint32_t>(cfg.ffn_dim));
    w.pod<uint32_t>(static_cast<uint32_t>(cfg.max_positions));
    w.pod<uint32_t>(static_cast<uint32_t>(cfg.num_channels));
    w.pod<uint32_t>(static_cast<uint32_t>(cfg.num_bins));
    w.str(cfg.alphabet);
    w.str(metadata_json);

    uint32_t count = 0;
    params.for_each_tensor([&](const std::string&, Tensor<float>&) { ++count; });
    w.pod<uint32_t>(count);
    params.for_each_tensor([&](const std::string& name, Tensor<float>& t) {
        w.str(name);
        w.pod<uint64_t>(static_cast<uint64_t>(t.rows));
        w.pod<uint64_t>(static_cast<uint64_t>(t.cols));
        w.write(t.data.data(), t.data.size() * sizeof(float));
    });
    const uint32_t crc = w.crc();
    os.write(reinterpret_cast<const char*>(&crc), sizeof(crc));
    if (!os) throw Error(ErrorCode::IoError, "write failed for " + path);
}

Params<float> load_checkpoint(const std::string& path, ModelConfig& cfg,
                              std::string* metadata_json) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw Error(ErrorCode::IoError, "cannot open " + path);
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, kMagic, 4) != 0)
        throw Error(ErrorCode::IoError, "bad checkpoint magic in " + path);
    CheckedReader r(is);
    if (r.pod<uint32_t>() != kVersion)
        throw Error(ErrorCode::IoError, "unsupported checkpoint version");
    cfg.num_layers = static_cast<int>(r.pod<uint32_t>());
    cfg.model_dim = static_cast<int>(r.pod<uint32_t>());
    cfg.num_heads = static_cast<int>(r.pod<uint32_t>());
    cfg.ffn_dim = static_cast<int>(r.pod<uint32_t>());
    cfg.max_positions = static_cast<int>(r.pod<uint32_t>());
    cfg.num_channels = static_cast<int>(r.pod<uint32_t>());
    cfg.num_bins = static_cast<int>(r.pod<uint32_t>());
    cfg.alphabet = r.str();
    const std::string meta = r.str();
    if (metadata_json) *metadata_json = meta;
    cfg.validate();

    Params<float> params = init_params<float>(cfg, 0);
    const uint32_t count = r.pod<uint32_t>();
    uint32_t seen = 0;
    params.for_each_tensor([&](const std::string& name, Tensor<float>& t) {
        const std::string stored = r.str();
        if (stored != name)
            throw Error(ErrorCode::IoError, "tensor order mismatch: " + stored + " vs " + name);
        const auto rows = static_cast<long>(r.pod<uint64_t>());
        const auto cols = static_cast<long>(r.pod<uint64_t>());
        if (rows != t.rows || cols != t.cols)
            throw Error(ErrorCode::IoError, "tensor shape mismatch for " + name);
        r.read(t.data.data(), t.data.size() * sizeof(float));
        ++seen;
    });
    if (seen != count) throw Error(ErrorCode::IoError, "tensor count mismatch");
    const uint32_t expected = r.crc();
    uint32_t stored_crc = 0;
    is.read(reinterpret_cast<char*>(&stored_crc), sizeof(stored_crc));
    if (!is || stored_crc != expected)
        throw Error(ErrorCode::IoError, "checkpoint checksum mismatch in " + path);
    return params;
}

}  // namespace speakstream::nn
