#include "flowscope/classify.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace flowscope {

ParseError::ParseError(const std::string& what, const std::string& file, int line)
    : std::runtime_error(file + ":" + std::to_string(line) + ": " + what),
      file_(file),
      line_(line) {}

std::string Cidr::to_string() const {
    char buf[24];
    std::snprintf(buf, sizeof buf, "%u.%u.%u.%u/%d", (addr >> 24) & 0xff,
                  (addr >> 16) & 0xff, (addr >> 8) & 0xff, addr & 0xff, prefix_len);
    return buf;
}

std::optional<Cidr> Cidr::parse(const std::string& text) {
    auto slash = text.find('/');
    if (slash == std::string::npos) return std::nullopt;
    auto addr = parse_addr(text.substr(0, slash));
    if (!addr) return std::nullopt;
    int len;
    try {
        size_t used = 0;
        len = std::stoi(text.substr(slash + 1), &used);
        if (used != text.size() - slash - 1) return std::nullopt;
    } catch (const std::exception&) {
        return std::nullopt;
    }
    if (len < 0 || len > 32) return std::nullopt;
    uint32_t mask = len == 0 ? 0 : (len == 32 ? 0xffffffffu : ~(0xffffffffu >> len));
    return Cidr{*addr & mask, len};
}

namespace {

bool any_contains(const std::vector<Cidr>& blocks, uint32_t a) {
    return std::any_of(blocks.begin(), blocks.end(),
                       [&](const Cidr& c) { return c.contains(a); });
}

bool cidrs_overlap(const Cidr& a, const Cidr& b) {
    const Cidr& shorter = a.prefix_len <= b.prefix_len ? a : b;
    const Cidr& longer = a.prefix_len <= b.prefix_len ? b : a;
    return shorter.contains(longer.addr);
}

std::string strip(const std::string& s) {
    auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

}  // namespace

bool PrefixConfig::is_lan(uint32_t a) const { return any_contains(lan, a); }
bool PrefixConfig::is_man(uint32_t a) const { return any_contains(man, a); }

void PrefixConfig::validate() const {
    if (lan.empty()) throw OverlapError("prefix config: no lan prefixes given");
    for (const auto& l : lan)
        for (const auto& m : man)
            if (cidrs_overlap(l, m))
                throw OverlapError("prefix config: lan " + l.to_string() +
                                   " overlaps man " + m.to_string());
}

PrefixConfig PrefixConfig::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open", path, 0);
    PrefixConfig cfg;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        lineno++;
        auto hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        line = strip(line);
        if (line.empty()) continue;
        std::istringstream ss(line);
        std::string kind, cidr_text;
        ss >> kind >> cidr_text;
        auto cidr = Cidr::parse(cidr_text);
        if (!cidr || (kind != "lan" && kind != "man"))
            throw ParseError("expected 'lan <cidr>' or 'man <cidr>'", path, lineno);
        auto& list = kind == "lan" ? cfg.lan : cfg.man;
        if (std::find(list.begin(), list.end(), *cidr) != list.end())
            throw ParseError("duplicate prefix " + cidr->to_string(), path, lineno);
        list.push_back(*cidr);
    }
    cfg.validate();
    return cfg;
}

const char* scope_name(Scope s) {
    switch (s) {
        case Scope::Lan: return "LAN";
        case Scope::Man: return "MAN";
        case Scope::Wan: return "WAN";
    }
    return "?";
}

ScopeResult classify_scope(const PacketRecord& pkt, const PrefixConfig& cfg) {
    bool src_lan = cfg.is_lan(pkt.src_addr);
    bool dst_lan = cfg.is_lan(pkt.dst_addr);
    ScopeResult out{};
    if (src_lan && dst_lan) {
        out.scope = Scope::Lan;
        return out;
    }
    if (src_lan || dst_lan) {
        uint32_t remote = src_lan ? pkt.dst_addr : pkt.src_addr;
        out.remote_addr = remote;
        out.scope = cfg.is_man(remote) ? Scope::Man : Scope::Wan;
        return out;
    }
    // No local endpoint: classify by destination, flag for diagnostics.
    out.foreign_both_ends = true;
    out.remote_addr = pkt.dst_addr;
    out.scope = cfg.is_man(pkt.dst_addr) ? Scope::Man : Scope::Wan;
    return out;
}

void GeoDb::add(Cidr block, const std::string& continent) {
    auto& table = by_len_[block.prefix_len];
    auto [it, inserted] = table.insert_or_assign(block.addr, continent);
    (void)it;
    if (inserted)
        count_++;
    else
        dup_overwrites_++;
}

const std::string& GeoDb::lookup(uint32_t addr) const {
    static const std::string kUnknown = "Unknown";
    for (int len = 32; len >= 0; len--) {
        const auto& table = by_len_[len];
        if (table.empty()) continue;
        uint32_t mask = len == 0 ? 0 : (len == 32 ? 0xffffffffu : ~(0xffffffffu >> len));
        auto it = table.find(addr & mask);
        if (it != table.end()) return it->second;
    }
    return kUnknown;
}

GeoDb GeoDb::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open", path, 0);
    GeoDb db;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        lineno++;
        auto hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        line = strip(line);
        if (line.empty()) continue;
        auto comma = line.find(',');
        if (comma == std::string::npos)
            throw ParseError("expected 'cidr,continent'", path, lineno);
        auto cidr = Cidr::parse(strip(line.substr(0, comma)));
        std::string label = strip(line.substr(comma + 1));
        if (!cidr || label.empty())
            throw ParseError("expected 'cidr,continent'", path, lineno);
        db.add(*cidr, label);
    }
    return db;
}

const std::vector<std::string>& continent_labels() {
    static const std::vector<std::string> kLabels = {
        "Africa",        "Asia",    "Europe", "North America",
        "South America", "Oceania", "Unknown"};
    return kLabels;
}

std::string TransportClass::label() const {
    switch (kind) {
        case Transport::Icmp: return "ICMP";
        case Transport::Igmp: return "IGMP";
        case Transport::Tcp: return "TCP";
        case Transport::Udp: return "UDP";
        case Transport::Other: return "Other(" + std::to_string(protocol) + ")";
    }
    return "?";
}

TransportClass classify_transport(const PacketRecord& pkt) {
    switch (pkt.protocol) {
        case 1: return {Transport::Icmp, 1};
        case 2: return {Transport::Igmp, 2};
        case 6: return {Transport::Tcp, 6};
        case 17: return {Transport::Udp, 17};
        default: return {Transport::Other, pkt.protocol};
    }
}

void ServiceDb::add(const std::string& name, uint16_t port, bool tcp) {
    map_[(static_cast<uint32_t>(tcp) << 16) | port] = name;
}

std::optional<std::string> ServiceDb::lookup(uint16_t port, bool tcp) const {
    auto it = map_.find((static_cast<uint32_t>(tcp) << 16) | port);
    if (it == map_.end()) return std::nullopt;
    return it->second;
}

ServiceDb ServiceDb::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open", path, 0);
    ServiceDb db;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        lineno++;
        auto hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        line = strip(line);
        if (line.empty()) continue;
        std::istringstream ss(line);
        std::string name, portproto;
        ss >> name >> portproto;
        auto slash = portproto.find('/');
        if (name.empty() || slash == std::string::npos)
            throw ParseError("expected 'name port/proto'", path, lineno);
        int port;
        try {
            port = std::stoi(portproto.substr(0, slash));
        } catch (const std::exception&) {
            throw ParseError("bad port number", path, lineno);
        }
        if (port < 0 || port > 65535) throw ParseError("bad port number", path, lineno);
        std::string proto = portproto.substr(slash + 1);
        if (proto == "tcp")
            db.add(name, static_cast<uint16_t>(port), true);
        else if (proto == "udp")
            db.add(name, static_cast<uint16_t>(port), false);
        else
            throw ParseError("unknown protocol '" + proto + "'", path, lineno);
    }
    return db;
}

bool is_mail_port(uint16_t port) {
    switch (port) {
        case 25:
        case 110:
        case 143:
        case 465:
        case 587:
        case 993:
        case 995:
            return true;
        default:
            return false;
    }
}

ServiceClass classify_service(uint16_t server_port, const ServiceDb& db) {
    if (server_port == 22) return {ServiceCategory::Ssh, "SSH"};
    if (server_port == 53) return {ServiceCategory::Dns, "DNS"};
    if (is_mail_port(server_port)) return {ServiceCategory::Mail, "Mail"};
    if (server_port == 80) return {ServiceCategory::Http, "HTTP"};
    if (server_port == 443) return {ServiceCategory::Https, "HTTPS"};
    if (auto name = db.lookup(server_port, true))
        return {ServiceCategory::Named, *name};
    return {ServiceCategory::NonIdentified, "NonIdentified"};
}

}  // namespace flowscope
