// Copyright 2026 relightkit authors
// SPDX-License-Identifier: Apache-2.0
#include "relight/checkpoint.hpp"

#include <cstring>
#include <map>
#include <stdexcept>

#include <json.hpp>

#include "relight/imageio.hpp"

namespace relight {

using nlohmann::json;

namespace {

constexpr char kMagic[8] = {'R', 'L', 'K', 'C', 'K', 'P', 'T', '1'};

void put_u32(std::string& out, uint32_t v) { out.append(reinterpret_cast<char*>(&v), 4); }
void put_u64(std::string& out, uint64_t v) { out.append(reinterpret_cast<char*>(&v), 8); }

struct Reader {
    const std::string& buf;
    size_t pos = 0;

    void need(size_t n) const {
        if (pos + n > buf.size()) throw std::runtime_error("checkpoint: truncated file");
    }
    uint32_t u32() {
        need(4);
        uint32_t v;
        std::memcpy(&v, buf.data() + pos, 4);
        pos += 4;
        return v;
    }
    uint64_t u64() {
        need(8);
        uint64_t v;
        std::memcpy(&v, buf.data() + pos, 8);
        pos += 8;
        return v;
    }
    std::string bytes(size_t n) {
        need(n);
        std::string s = buf.substr(pos, n);
        pos += n;
        return s;
    }
};

void put_tensor(std::string& out, const std::string& name, const Tensor<float>& t) {
    put_u32(out, static_cast<uint32_t>(name.size()));
    out.append(name);
    put_u32(out, static_cast<uint32_t>(t.shape.size()));
    for (int d : t.shape) put_u32(out, static_cast<uint32_t>(d));
    put_u64(out, static_cast<uint64_t>(t.size() * sizeof(float)));
    out.append(reinterpret_cast<const char*>(t.ptr()), t.size() * sizeof(float));
}

std::pair<std::string, Tensor<float>> get_tensor(Reader& r) {
    uint32_t name_len = r.u32();
    std::string name = r.bytes(name_len);
    uint32_t ndim = r.u32();
    std::vector<int> shape(ndim);
    for (auto& d : shape) d = static_cast<int>(r.u32());
    uint64_t nbytes = r.u64();
    Tensor<float> t(shape);
    if (nbytes != t.size() * sizeof(float))
        throw std::runtime_error("checkpoint: tensor size mismatch for " + name);
    r.need(nbytes);
    std::memcpy(t.ptr(), r.buf.data() + r.pos, nbytes);
    r.pos += nbytes;
    return {std::move(name), std::move(t)};
}

std::string lora_name(size_t i, const char* part) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "lora.%04zu.%s", i, part);
    return buf;
}

std::string adam_name(const char* which, size_t i) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "adam.%s.%04zu", which, i);
    return buf;
}

}  // namespace

void save_checkpoint(const std::string& path, const Checkpoint& ck) {
    json header;
    header["version"] = 1;
    header["step"] = ck.step;
    header["rng"] = ck.rng_state;
    header["config"] = ck.config_json;
    header["net"] = {{"in_ch", ck.model.cfg.in_ch},
                     {"out_ch", ck.model.cfg.out_ch},
                     {"base", ck.model.cfg.base},
                     {"temb_dim", ck.model.cfg.temb_dim},
                     {"groups", ck.model.cfg.groups}};
    if (ck.adapter)
        header["lora"] = {{"rank", ck.adapter->rank}, {"alpha", ck.adapter->alpha}};
    else
        header["lora"] = nullptr;
    header["has_adam"] = ck.adam.has_value();
    header["adam_step"] = ck.adam ? ck.adam->step : 0;

    size_t n_tensors = 0;
    visit_params<float>(ck.model,
                        [&](const std::string&, const Tensor<float>&) { ++n_tensors; });
    if (ck.adapter) n_tensors += 2 * ck.adapter->layers.size();
    if (ck.adam) n_tensors += ck.adam->m.size() + ck.adam->v.size();

    std::string out;
    out.append(kMagic, 8);
    std::string htext = header.dump();
    put_u64(out, htext.size());
    out.append(htext);
    put_u64(out, n_tensors);

    visit_params<float>(ck.model, [&](const std::string& name, const Tensor<float>& t) {
        put_tensor(out, "model." + name, t);
    });
    if (ck.adapter) {
        for (size_t i = 0; i < ck.adapter->layers.size(); ++i) {
            put_tensor(out, lora_name(i, "A"), ck.adapter->layers[i].A);
            put_tensor(out, lora_name(i, "B"), ck.adapter->layers[i].B);
        }
    }
    if (ck.adam) {
        for (size_t i = 0; i < ck.adam->m.size(); ++i)
            put_tensor(out, adam_name("m", i), ck.adam->m[i]);
        for (size_t i = 0; i < ck.adam->v.size(); ++i)
            put_tensor(out, adam_name("v", i), ck.adam->v[i]);
    }
    atomic_write_bytes(path, out);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::string buf = read_file_bytes(path);
    Reader r{buf};
    if (r.bytes(8) != std::string(kMagic, 8))
        throw std::runtime_error("checkpoint: bad magic in " + path);
    uint64_t hlen = r.u64();
    json header = json::parse(r.bytes(hlen));
    if (header.at("version").get<int>() != 1)
        throw std::runtime_error("checkpoint: unsupported version");

    Checkpoint ck;
    ck.step = header.at("step").get<uint64_t>();
    ck.rng_state = header.at("rng").get<std::string>();
    ck.config_json = header.at("config").get<std::string>();

    UNetConfig cfg;
    cfg.in_ch = header.at("net").at("in_ch").get<int>();
    cfg.out_ch = header.at("net").at("out_ch").get<int>();
    cfg.base = header.at("net").at("base").get<int>();
    cfg.temb_dim = header.at("net").at("temb_dim").get<int>();
    cfg.groups = header.at("net").at("groups").get<int>();
    Rng dummy(0);
    ck.model = make_unet<float>(cfg, dummy);

    uint64_t n_tensors = r.u64();
    std::map<std::string, Tensor<float>> table;
    for (uint64_t i = 0; i < n_tensors; ++i) {
        auto [name, t] = get_tensor(r);
        table.emplace(std::move(name), std::move(t));
    }

    visit_params<float>(ck.model, [&](const std::string& name, Tensor<float>& t) {
        auto it = table.find("model." + name);
        if (it == table.end()) throw std::runtime_error("checkpoint: missing tensor " + name);
        if (it->second.shape != t.shape)
            throw std::runtime_error("checkpoint: shape mismatch for " + name);
        t = std::move(it->second);
    });

    if (!header.at("lora").is_null()) {
        LoraAdapter<float> ad;
        ad.rank = header.at("lora").at("rank").get<int>();
        ad.alpha = header.at("lora").at("alpha").get<double>();
        visit_convs<float>(ck.model, [&](const std::string& name, const Conv2d<float>&) {
            ad.names.push_back(name);
        });
        for (size_t i = 0; i < ad.names.size(); ++i) {
            LoraLayer<float> layer;
            layer.A = table.at(lora_name(i, "A"));
            layer.B = table.at(lora_name(i, "B"));
            ad.layers.push_back(std::move(layer));
        }
        ck.adapter = std::move(ad);
    }

    if (header.at("has_adam").get<bool>()) {
        AdamState st;
        st.step = header.at("adam_step").get<uint64_t>();
        for (size_t i = 0; table.count(adam_name("m", i)); ++i) {
            st.m.push_back(table.at(adam_name("m", i)));
            st.v.push_back(table.at(adam_name("v", i)));
        }
        ck.adam = std::move(st);
    }
    return ck;
}

std::string train_config_to_json(const TrainConfig& cfg) {
    json j;
    j["batch_size"] = cfg.batch_size;
    j["steps"] = cfg.steps;
    j["lr"] = cfg.lr;
    j["beta1"] = cfg.beta1;
    j["beta2"] = cfg.beta2;
    j["eps"] = cfg.eps;
    j["seed"] = cfg.seed;
    j["mode"] = to_string(cfg.mode);
    j["input_source"] = cfg.input_source;
    j["background"] = cfg.background;
    j["checkpoint_every"] = cfg.checkpoint_every;
    j["lora_rank"] = cfg.lora_rank;
    j["lora_alpha"] = cfg.lora_alpha;
    j["schedule_T"] = cfg.schedule_T;
    j["net"] = {{"in_ch", cfg.net.in_ch},
                {"out_ch", cfg.net.out_ch},
                {"base", cfg.net.base},
                {"temb_dim", cfg.net.temb_dim},
                {"groups", cfg.net.groups}};
    return j.dump();
}

TrainConfig train_config_from_json(const std::string& text) {
    json j = json::parse(text);
    TrainConfig cfg;
    cfg.batch_size = j.at("batch_size").get<int>();
    cfg.steps = j.at("steps").get<int>();
    cfg.lr = j.at("lr").get<double>();
    cfg.beta1 = j.at("beta1").get<double>();
    cfg.beta2 = j.at("beta2").get<double>();
    cfg.eps = j.at("eps").get<double>();
    cfg.seed = j.at("seed").get<uint64_t>();
    cfg.mode = train_mode_from_string(j.at("mode").get<std::string>());
    cfg.input_source = j.at("input_source").get<std::string>();
    cfg.background = j.at("background").get<std::string>();
    cfg.checkpoint_every = j.at("checkpoint_every").get<int>();
    cfg.lora_rank = j.at("lora_rank").get<int>();
    cfg.lora_alpha = j.at("lora_alpha").get<double>();
    cfg.schedule_T = j.at("schedule_T").get<int>();
    cfg.net.in_ch = j.at("net").at("in_ch").get<int>();
    cfg.net.out_ch = j.at("net").at("out_ch").get<int>();
    cfg.net.base = j.at("net").at("base").get<int>();
    cfg.net.temb_dim = j.at("net").at("temb_dim").get<int>();
    cfg.net.groups = j.at("net").at("groups").get<int>();
    return cfg;
}

}  // namespace relight
