// Copyright 2026 relightkit authors
// SPDX-License-Identifier: Apache-2.0
#include "relight/common.hpp"

#include <algorithm>
#include <cstdlib>
#include <sstream>

namespace relight {

std::string Rng::state_string() const {
    std::ostringstream ss;
    ss << engine_ << ' ' << (have_spare_ ? 1 : 0) << ' ';
    ss.precision(17);
    ss << spare_;
    return ss.str();
}

void Rng::set_state_string(const std::string& s) {
    std::istringstream ss(s);
    int spare_flag = 0;
    ss >> engine_ >> spare_flag >> spare_;
    if (ss.fail()) throw std::runtime_error("bad rng state string");
    have_spare_ = spare_flag != 0;
}

namespace {
uint64_t splitmix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}
}  // namespace

uint64_t derive_seed(uint64_t base, uint64_t stream) {
    return splitmix64(base ^ splitmix64(stream + 0x632be59bd9b4e019ULL));
}

uint64_t derive_seed(uint64_t base, const std::string& tag) {
    uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
    for (unsigned char c : tag) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return derive_seed(base, h);
}

int worker_count() {
    if (const char* env = std::getenv("RELIGHTKIT_THREADS")) {
        int n = std::atoi(env);
        if (n >= 1) return n;
    }
    unsigned hc = std::thread::hardware_concurrency();
    return hc == 0 ? 1 : static_cast<int>(hc);
}

void parallel_for(int64_t n, const std::function<void(int64_t, int64_t)>& body) {
    if (n <= 0) return;
    int workers = std::min<int64_t>(worker_count(), n);
    if (workers <= 1) {
        body(0, n);
        return;
    }
    std::vector<std::thread> threads;
    threads.reserve(workers);
    int64_t chunk = (n + workers - 1) / workers;
    for (int w = 0; w < workers; ++w) {
        int64_t begin = w * chunk;
        int64_t end = std::min<int64_t>(begin + chunk, n);
        if (begin >= end) break;
        threads.emplace_back([&body, begin, end] { body(begin, end); });
    }
    for (auto& t : threads) t.join();
}

}  // namespace relight
