#define OPENSSL_SUPPRESS_DEPRECATED
#include "flowscope/anon.hpp"

#include <openssl/aes.h>

#include <cstdio>
#include <cstring>

#include "flowscope/pcap.hpp"

namespace flowscope {

struct Anonymizer::AesState {
    AES_KEY enc;
    std::array<uint8_t, 16> pad;
};

AnonKey AnonKey::from_hex(const std::string& hex) {
    if (hex.size() != 32) throw BadKeyLength("anonymization key must be 32 hex chars");
    AnonKey key;
    for (size_t i = 0; i < 16; i++) {
        auto nib = [&](char c) -> int {
            if (c >= '0' && c <= '9') return c - '0';
            if (c >= 'a' && c <= 'f') return c - 'a' + 10;
            if (c >= 'A' && c <= 'F') return c - 'A' + 10;
            throw BadKeyLength("anonymization key contains non-hex characters");
        };
        key.bytes[i] =
            static_cast<uint8_t>((nib(hex[2 * i]) << 4) | nib(hex[2 * i + 1]));
    }
    return key;
}

Anonymizer::Anonymizer(const AnonKey& key) {
    auto st = std::make_shared<AesState>();
    AES_set_encrypt_key(key.bytes.data(), 128, &st->enc);
    uint8_t zero[16] = {0};
    AES_encrypt(zero, st->pad.data(), &st->enc);
    aes_ = st;
}

Anonymizer Anonymizer::with_prf(PrefixPrf prf) {
    Anonymizer a;
    a.prf_ = std::move(prf);
    return a;
}

uint32_t Anonymizer::anonymize(uint32_t addr) const {
    uint32_t out = 0;
    for (int i = 0; i < 32; i++) {
        uint32_t prefix = i == 0 ? 0 : (addr >> (32 - i)) << (32 - i);
        bool flip;
        if (aes_) {
            // Block = first i address bits, then the pad's remaining bits.
            uint8_t block[16];
            std::memcpy(block, aes_->pad.data(), 16);
            for (int b = 0; b < i; b++) {
                uint8_t bit = (prefix >> (31 - b)) & 1;
                uint8_t mask = static_cast<uint8_t>(0x80 >> (b % 8));
                if (bit)
                    block[b / 8] |= mask;
                else
                    block[b / 8] &= static_cast<uint8_t>(~mask);
            }
            uint8_t ct[16];
            AES_encrypt(block, ct, &aes_->enc);
            flip = (ct[0] & 0x80) != 0;
        } else {
            flip = prf_(prefix, i);
        }
        uint32_t bit = (addr >> (31 - i)) & 1;
        out |= (bit ^ static_cast<uint32_t>(flip)) << (31 - i);
    }
    return out;
}

namespace {

uint32_t transport_checksum(const uint8_t* ip, size_t ihl, uint16_t total_len,
                            size_t cksum_off) {
    uint32_t sum = 0;
    // pseudo header
    sum += static_cast<uint32_t>((ip[12] << 8) | ip[13]);
    sum += static_cast<uint32_t>((ip[14] << 8) | ip[15]);
    sum += static_cast<uint32_t>((ip[16] << 8) | ip[17]);
    sum += static_cast<uint32_t>((ip[18] << 8) | ip[19]);
    sum += ip[9];
    uint16_t seg_len = static_cast<uint16_t>(total_len - ihl);
    sum += seg_len;
    const uint8_t* seg = ip + ihl;
    for (size_t i = 0; i < seg_len; i += 2) {
        if (i == cksum_off) continue;
        uint16_t word = static_cast<uint16_t>(seg[i] << 8);
        if (i + 1 < seg_len) word |= seg[i + 1];
        sum += word;
    }
    while (sum >> 16) sum = (sum & 0xffff) + (sum >> 16);
    uint16_t folded = static_cast<uint16_t>(~sum);
    return folded;
}

}  // namespace

IngestStats anonymize_trace(const std::string& in_path, const std::string& out_path,
                            const Anonymizer& anon) {
    PcapRawReader in(in_path);
    std::FILE* out = std::fopen(out_path.c_str(), "wb");
    if (!out) throw PcapError("cannot create " + out_path);
    IngestStats stats;
    auto wr = [&](const void* p, size_t n) {
        if (std::fwrite(p, 1, n, out) != n) {
            std::fclose(out);
            throw PcapError("write failure: " + out_path);
        }
    };
    wr(in.file_header().data(), in.file_header().size());
    while (auto rec = in.next()) {
        size_t ip_off = 0;
        auto pkt = decode_frame(rec->frame.data(), rec->frame.size(), rec->orig_len,
                                in.meta().link_type, rec->ts_us, stats, &ip_off);
        if (pkt) {
            uint8_t* ip = rec->frame.data() + ip_off;
            size_t ihl = static_cast<size_t>(ip[0] & 0x0f) * 4;
            uint32_t src = anon.anonymize(pkt->src_addr);
            uint32_t dst = anon.anonymize(pkt->dst_addr);
            for (int b = 0; b < 4; b++) {
                ip[12 + b] = static_cast<uint8_t>(src >> (24 - 8 * b));
                ip[16 + b] = static_cast<uint8_t>(dst >> (24 - 8 * b));
            }
            uint16_t ipck = ipv4_header_checksum(ip, ihl);
            ip[10] = static_cast<uint8_t>(ipck >> 8);
            ip[11] = static_cast<uint8_t>(ipck & 0xff);
            bool full = rec->frame.size() >= ip_off + pkt->ip_total_length;
            if (full && !pkt->non_first_fragment &&
                (pkt->protocol == 6 || pkt->protocol == 17)) {
                size_t cksum_off = pkt->protocol == 6 ? 16 : 6;
                uint8_t* ckp = ip + ihl + cksum_off;
                uint16_t old = static_cast<uint16_t>((ckp[0] << 8) | ckp[1]);
                // UDP checksum 0 means "not computed"; leave it that way.
                if (!(pkt->protocol == 17 && old == 0)) {
                    uint16_t ck = static_cast<uint16_t>(
                        transport_checksum(ip, ihl, pkt->ip_total_length, cksum_off));
                    if (pkt->protocol == 17 && ck == 0) ck = 0xffff;
                    ckp[0] = static_cast<uint8_t>(ck >> 8);
                    ckp[1] = static_cast<uint8_t>(ck & 0xff);
                }
            }
        }
        wr(rec->header.data(), rec->header.size());
        wr(rec->frame.data(), rec->frame.size());
    }
    if (std::fclose(out) != 0) throw PcapError("write failure: " + out_path);
    return stats;
}

}  // namespace flowscope
