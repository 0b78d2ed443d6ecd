#pragma once

// The five-message handshake between clients, routers and the energy server,
// plus the in-memory transport that carries it.

#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "sden/core.hpp"

namespace sden {

enum class MessageKind { Request, Accept, Reject, DeliveryNotice, StorageNotice, Ack, Emergency };

std::string_view to_string(MessageKind kind);
std::optional<MessageKind> parse_message_kind(std::string_view text);

/// Resubmission guidance attached to every rejection.
struct RejectHint {
  SlotIndex earliest_feasible_slot = 0;
  Packets max_packets_feasible_now = 0;

  bool operator==(const RejectHint&) const = default;
};

struct RequestBody {
  ServiceRequest request;
  bool operator==(const RequestBody&) const = default;
};
struct AcceptBody {
  PriorityClass assigned_class = 1;
  bool operator==(const AcceptBody&) const = default;
};
struct RejectBody {
  RejectHint hint;
  std::string reason;
  bool operator==(const RejectBody&) const = default;
};
struct DeliveryBody {
  SlotIndex slot = 0;
  Packets packets = 0;
  bool operator==(const DeliveryBody&) const = default;
};
struct StorageBody {
  SlotIndex slot = 0;
  Packets flow = 0;  // positive = charge
  bool operator==(const StorageBody&) const = default;
};
struct AckBody {
  Packets packets = 0;
  bool operator==(const AckBody&) const = default;
};

using MessageBody = std::variant<RequestBody, AcceptBody, RejectBody, DeliveryBody, StorageBody, AckBody>;

struct Message {
  MessageKind kind = MessageKind::Request;
  RequestId correlation_id;
  AgentId sender;
  AgentId receiver;
  MessageBody payload;
  SlotIndex sent_slot = 0;

  bool operator==(const Message&) const = default;
};

Message make_request_message(const ServiceRequest& req, const AgentId& receiver, SlotIndex now);

class ProtocolViolation : public std::logic_error {
public:
  using std::logic_error::logic_error;
};

enum class ClientRequestState { Idle, Requested, Accepted, PartiallyDelivered, Completed, Rejected, EmergencyPending };

std::string_view to_string(ClientRequestState state);

/// What a client does with a rejection.
enum class RetryPolicy {
  ShiftWindow,    // re-issue the same request from the hinted earliest slot
  ReducePackets,  // re-issue in the same window with the hinted feasible packet count
  RetrySame,      // re-issue unchanged next slot while the window is still valid
  GiveUp,
};

std::optional<RetryPolicy> parse_retry_policy(std::string_view text);

struct TrackedRequest {
  ServiceRequest request;
  ClientRequestState state = ClientRequestState::Idle;
  Packets delivered = 0;
  std::string need;
  std::optional<SlotIndex> completed_slot;
};

struct NeedState {
  RetryPolicy policy = RetryPolicy::GiveUp;
  int rejections = 0;
  int attempts = 0;
  bool abandoned = false;
};

/// True iff a need rejected `rejection_count` times should be escalated.
bool should_escalate(int rejection_count, int threshold);

/// Per-client protocol endpoint. A value type: copying it snapshots the FSM.
struct ClientProtocolState {
  AgentId client_id;
  AgentId upstream_id;        // router the client talks to
  AgentId server_id = "server";
  int escalation_threshold = 3;
  int max_attempts = 8;
  SlotIndex lead_slots = 0;   // earliest_slot is never set closer than this to submission
  bool acks_enabled = true;
  std::uint64_t next_seq = 0;
  std::map<RequestId, TrackedRequest> requests;
  std::map<std::string, NeedState> needs;

  /// Registers a new request for `need` and returns the message to send.
  /// Assigns request_id/client_id/submission_slot; escalates to Emergency when
  /// the need has reached the rejection threshold.
  Message issue(ServiceRequest req, const std::string& need, RetryPolicy policy, SlotIndex now);

  /// Handles one inbound message in place. Throws ProtocolViolation on unknown
  /// correlation ids or illegal (state, kind) pairs.
  std::optional<Message> on_message(const Message& msg, SlotIndex now);

  const TrackedRequest& at(const RequestId& id) const;
};

struct ClientStep {
  ClientProtocolState state;
  std::optional<Message> outgoing;
};

/// Pure form of ClientProtocolState::on_message.
ClientStep client_on_message(ClientProtocolState state, const Message& msg, SlotIndex now);

enum class RouterMode { ForwardOnly, LocalFirst };

struct RouterPolicy {
  RouterMode mode = RouterMode::ForwardOnly;
  std::vector<AgentId> local_resources;

  void validate() const;
};

/// Household-level energy the router may hand out in the current slot.
struct LocalView {
  SlotIndex slot = 0;
  Packets surplus_packets = 0;
};

struct RouterOutput {
  std::vector<ServiceRequest> forwarded;
  std::vector<Assignment> local;  // requests served entirely from local surplus this slot
};

/// ForwardOnly passes the batch through. LocalFirst serves whole requests that
/// can be delivered in `local.slot` from local surplus, earliest deadline first
/// (ties by submission slot, then request id), and forwards the rest.
RouterOutput router_process(const RouterPolicy& policy, std::span<const ServiceRequest> batch,
                            const LocalView& local);

struct ChannelConfig {
  SlotIndex delay_slots = 0;
  double loss = 0.0;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Simulated link shared by all agents. Per (sender, receiver) pair delivery
/// is FIFO; across pairs it is ordered by (arrival slot, sender, sequence).
class Channel {
public:
  explicit Channel(ChannelConfig config = {});

  const ChannelConfig& config() const { return config_; }
  /// Queues `msg`; returns its arrival slot or nullopt if the link drops it.
  std::optional<SlotIndex> send(const Message& msg, SlotIndex now);
  /// Removes and returns every queued message with arrival ≤ now, canonically ordered.
  std::vector<Message> deliver_due(SlotIndex now);
  bool idle() const { return queue_.empty(); }
  std::uint64_t sent_count() const { return seq_; }

private:
  struct InFlight {
    SlotIndex arrival;
    std::uint64_t seq;
    Message msg;
  };
  ChannelConfig config_;
  std::uint64_t seq_ = 0;
  std::vector<InFlight> queue_;
};

/// Sends `msg` over `channel` at `now`: arrival slot, or nullopt when dropped.
std::optional<SlotIndex> transport_deliver(Channel& channel, const Message& msg, SlotIndex now);

struct TraceRecord {
  Message msg;
  std::optional<SlotIndex> arrival;  // nullopt = dropped by the channel
};

/// One JSON object per message: slot, kind, sender, receiver, correlation_id, payload, arrival.
std::string to_json_line(const TraceRecord& record);
TraceRecord trace_record_from_json_line(const std::string& line);

struct HandshakeReport {
  std::size_t requests = 0;
  std::size_t violations = 0;
  std::vector<std::string> details;  // first few violations, human readable

  bool ok() const { return violations == 0; }
};

/// Checks the lossless-channel handshake rules over a trace: exactly one
/// Accept or Reject per request, Accept before any DeliveryNotice, and
/// acknowledged packets equal to delivered packets per request.
HandshakeReport check_handshake_conformance(std::span<const TraceRecord> trace, bool acks_enabled = true);

}  // namespace sden
