#include "checkpoint.hpp"

#include <array>
#include <fstream>
#include <type_traits>

#include "errors.hpp"

namespace selfsynth {

namespace {

constexpr std::array<char, 4> kMagic = {'S', 'S', 'C', 'K'};
constexpr uint32_t kVersion = 1;

class Writer {
public:
    explicit Writer(const std::string& path) : out_(path, std::ios::binary) {
        if (!out_) throw IoError("cannot open checkpoint for writing: " + path);
    }

    template <class T>
    void raw(T v) {
        static_assert(std::is_trivially_copyable_v<T>);
        out_.write(reinterpret_cast<const char*>(&v), sizeof(T));
    }

    void str(const std::string& s) {
        raw(static_cast<uint32_t>(s.size()));
        out_.write(s.data(), static_cast<std::streamsize>(s.size()));
    }

    void doubles(const std::vector<double>& v) {
        raw(static_cast<uint64_t>(v.size()));
        out_.write(reinterpret_cast<const char*>(v.data()),
                   static_cast<std::streamsize>(v.size() * sizeof(double)));
    }

    void finish(const std::string& path) {
        out_.flush();
        if (!out_) throw IoError("failed writing checkpoint: " + path);
    }

private:
    std::ofstream out_;
};

class Reader {
public:
    explicit Reader(const std::string& path) : in_(path, std::ios::binary), path_(path) {
        if (!in_) throw IoError("cannot open checkpoint: " + path);
    }

    template <class T>
    T raw() {
        static_assert(std::is_trivially_copyable_v<T>);
        T v{};
        in_.read(reinterpret_cast<char*>(&v), sizeof(T));
        if (!in_) throw MalformedRecord("truncated checkpoint: " + path_);
        return v;
    }

    std::string str(uint32_t max_len = 1u << 20) {
        const uint32_t n = raw<uint32_t>();
        if (n > max_len) throw MalformedRecord("oversized string in checkpoint: " + path_);
        std::string s(n, '\0');
        in_.read(s.data(), n);
        if (!in_) throw MalformedRecord("truncated checkpoint: " + path_);
        return s;
    }

    std::vector<double> doubles(uint64_t max_len = 1ull << 30) {
        const uint64_t n = raw<uint64_t>();
        if (n > max_len) throw MalformedRecord("oversized array in checkpoint: " + path_);
        std::vector<double> v(n);
        in_.read(reinterpret_cast<char*>(v.data()),
                 static_cast<std::streamsize>(n * sizeof(double)));
        if (!in_) throw MalformedRecord("truncated checkpoint: " + path_);
        return v;
    }

    void expect_eof() {
        if (in_.peek() != std::char_traits<char>::eof()) {
            throw MalformedRecord("trailing bytes after checkpoint payload: " + path_);
        }
    }

private:
    std::ifstream in_;
    std::string path_;
};

}  // namespace

Model Checkpoint::make_model() const {
    Model m(config);
    if (params.size() != m.param_count()) {
        throw MalformedRecord("checkpoint parameter count does not match its architecture");
    }
    m.params() = params;
    return m;
}

Vocabulary Checkpoint::make_vocabulary() const {
    return Vocabulary(vocab_tokens);
}

void save_checkpoint(const std::string& path, const Checkpoint& ck) {
    Writer w(path);
    w.raw(kMagic);
    w.raw(kVersion);
    w.raw(static_cast<int32_t>(ck.config.vocab_size));
    w.raw(static_cast<int32_t>(ck.config.d_model));
    w.raw(static_cast<int32_t>(ck.config.n_heads));
    w.raw(static_cast<int32_t>(ck.config.n_layers));
    w.raw(static_cast<int32_t>(ck.config.d_ff));
    w.raw(static_cast<int32_t>(ck.config.context));
    w.raw(static_cast<uint32_t>(ck.vocab_tokens.size()));
    for (const auto& t : ck.vocab_tokens) w.str(t);
    w.doubles(ck.params);
    w.raw(static_cast<uint8_t>(ck.has_optimizer ? 1 : 0));
    if (ck.has_optimizer) {
        w.doubles(ck.optimizer.m);
        w.doubles(ck.optimizer.v);
        w.raw(static_cast<int64_t>(ck.optimizer.t));
    }
    w.str(ck.rng_state);
    w.raw(static_cast<int64_t>(ck.step));
    w.finish(path);
}

Checkpoint load_checkpoint(const std::string& path) {
    Reader r(path);
    const auto magic = r.raw<std::array<char, 4>>();
    if (magic != kMagic) {
        throw MalformedRecord("not a checkpoint file: " + path);
    }
    const auto version = r.raw<uint32_t>();
    if (version != kVersion) {
        throw MalformedRecord("unsupported checkpoint version " + std::to_string(version) +
                              ": " + path);
    }

    Checkpoint ck;
    ck.config.vocab_size = r.raw<int32_t>();
    ck.config.d_model = r.raw<int32_t>();
    ck.config.n_heads = r.raw<int32_t>();
    ck.config.n_layers = r.raw<int32_t>();
    ck.config.d_ff = r.raw<int32_t>();
    ck.config.context = r.raw<int32_t>();
    const auto n_tokens = r.raw<uint32_t>();
    if (n_tokens > 1u << 20) throw MalformedRecord("oversized vocabulary in checkpoint: " + path);
    ck.vocab_tokens.reserve(n_tokens);
    for (uint32_t i = 0; i < n_tokens; ++i) ck.vocab_tokens.push_back(r.str());
    ck.params = r.doubles();
    ck.has_optimizer = r.raw<uint8_t>() != 0;
    if (ck.has_optimizer) {
        ck.optimizer.m = r.doubles();
        ck.optimizer.v = r.doubles();
        ck.optimizer.t = r.raw<int64_t>();
    }
    ck.rng_state = r.str();
    ck.step = r.raw<int64_t>();
    r.expect_eof();

    if (static_cast<int>(ck.vocab_tokens.size()) != ck.config.vocab_size) {
        throw MalformedRecord("checkpoint vocabulary size disagrees with its architecture: " +
                              path);
    }
    return ck;
}

}  // namespace selfsynth
