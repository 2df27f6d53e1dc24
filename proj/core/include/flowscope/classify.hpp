#ifndef FLOWSCOPE_CLASSIFY_HPP
#define FLOWSCOPE_CLASSIFY_HPP

#include <array>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "flowscope/packet.hpp"

namespace flowscope {

class ParseError : public std::runtime_error {
  public:
    ParseError(const std::string& what, const std::string& file, int line);
    const std::string& file() const { return file_; }
    int line() const { return line_; }

  private:
    std::string file_;
    int line_;
};

class OverlapError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

struct Cidr {
    uint32_t addr = 0;  // low bits zeroed
    int prefix_len = 0;

    bool contains(uint32_t a) const {
        if (prefix_len == 0) return true;
        uint32_t mask = prefix_len == 32 ? 0xffffffffu : ~(0xffffffffu >> prefix_len);
        return (a & mask) == addr;
    }
    bool operator==(const Cidr&) const = default;
    std::string to_string() const;
    static std::optional<Cidr> parse(const std::string& text);
};

struct PrefixConfig {
    std::vector<Cidr> lan;
    std::vector<Cidr> man;  // may be empty

    bool is_lan(uint32_t a) const;
    bool is_man(uint32_t a) const;
    // Rejects duplicates and any LAN/MAN overlap; requires at least one lan line.
    static PrefixConfig load(const std::string& path);
    void validate() const;
};

enum class Scope { Lan, Man, Wan };

const char* scope_name(Scope s);

struct ScopeResult {
    Scope scope;
    // Neither endpoint was a LAN address; classified by destination.
    bool foreign_both_ends = false;
    // The endpoint geolocation applies to (the non-LAN one), for WAN packets.
    uint32_t remote_addr = 0;
};

ScopeResult classify_scope(const PacketRecord& pkt, const PrefixConfig& cfg);

// Longest-prefix-match continent database.
class GeoDb {
  public:
    void add(Cidr block, const std::string& continent);
    // Returns "Unknown" when nothing matches.
    const std::string& lookup(uint32_t addr) const;
    size_t size() const { return count_; }
    // CSV "cidr,continent"; duplicate blocks: last wins (counted).
    static GeoDb load(const std::string& path);
    uint64_t duplicate_overwrites() const { return dup_overwrites_; }

  private:
    // one exact-match table per prefix length, probed longest first
    std::array<std::unordered_map<uint32_t, std::string>, 33> by_len_;
    size_t count_ = 0;
    uint64_t dup_overwrites_ = 0;
};

// Fixed continent universe (plus Unknown for unmatched addresses).
const std::vector<std::string>& continent_labels();

enum class Transport { Icmp, Igmp, Tcp, Udp, Other };

struct TransportClass {
    Transport kind;
    uint8_t protocol;  // raw protocol number, meaningful for Other
    std::string label() const;
};

TransportClass classify_transport(const PacketRecord& pkt);

enum class ServiceCategory { Ssh, Dns, Mail, Http, Https, Named, NonIdentified };

struct ServiceClass {
    ServiceCategory category;
    std::string name;  // category label, or the services-file name for Named
};

// Port-to-service database in the conventional services-file format
// ("name port/proto").
class ServiceDb {
  public:
    void add(const std::string& name, uint16_t port, bool tcp);
    std::optional<std::string> lookup(uint16_t port, bool tcp) const;
    static ServiceDb load(const std::string& path);
    size_t size() const { return map_.size(); }

  private:
    std::unordered_map<uint32_t, std::string> map_;  // (tcp<<16)|port
};

// Ports aggregated under the Mail category.
bool is_mail_port(uint16_t port);

ServiceClass classify_service(uint16_t server_port, const ServiceDb& db);

}  // namespace flowscope

#endif
