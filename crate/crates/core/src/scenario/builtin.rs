//! Scenarios shipped with the tool.

pub const BUILTINS: &[(&str, &str)] = &[
    ("rbcast-happy", RBCAST_HAPPY),
    ("boundary-n2f", BOUNDARY_N2F),
    ("anomaly-deposit-spend", ANOMALY),
    ("rbcast-equivocation", RBCAST_EQUIVOCATION),
    ("snapshot-order", SNAPSHOT_ORDER),
    ("transfer-race", TRANSFER_RACE),
    ("transfer-chain", TRANSFER_CHAIN),
];

pub fn builtin(name: &str) -> Option<&'static str> {
    BUILTINS.iter().find(|(n, _)| *n == name).map(|(_, text)| *text)
}

const RBCAST_HAPPY: &str = "\
name = rbcast-happy
object = rbcast
n = 3
f = 1
max_steps = 100000
drain = 300

[op]
p = 1
call = broadcast 1 a

[op]
p = 2
call = broadcast 1 b

[op]
p = 3
call = deliver 1 1
after = 1

[op]
p = 3
call = deliver 2 1
after = 2

[expect]
all-complete
agreement
invariants
checker-pass
";

const BOUNDARY_N2F: &str = "\
name = boundary-n2f
object = rbcast
n = 4
f = 2
max_steps = 1000000

[op]
p = 1
call = broadcast 1 a

[op]
p = 2
call = broadcast 1 b

[adversary]
p = 3
strategy = crash-silent

[adversary]
p = 4
strategy = crash-silent

[expect]
never-completes = broadcast
invariants
";

const ANOMALY: &str = "\
# Account 1 starts at 10, receives 5 from 2, then sends 5 to 3. Its balance
# goes 10, 15, 10 and a read must never show 5.
name = anomaly-deposit-spend
object = asset-transfer
n = 4
f = 1
initial = 10, 5, 0, 0
max_steps = 300000

[op]
p = 2
call = transfer 1 5

[op]
p = 1
call = transfer 3 5
after = 1

[op]
p = 3
call = read 1

[op]
p = 3
call = read 1

[op]
p = 3
call = read 1

[adversary]
p = 4
strategy = overspend
records = 1:3:7

[expect]
all-complete
never-reads = 5
true-transfers = 2
conservation
invariants
checker-pass
";

const RBCAST_EQUIVOCATION: &str = "\
name = rbcast-equivocation
object = rbcast
n = 3
f = 1
max_steps = 100000
drain = 500

[op]
p = 1
call = broadcast 1 x

[op]
p = 2
call = deliver 3 1

[op]
p = 1
call = deliver 3 1
after = 1

[op]
p = 2
call = deliver 3 1
after = 2

[adversary]
p = 3
strategy = equivocate
stamps = 1
values = a, b

[expect]
all-complete
agreement
invariants
checker-pass
";

const SNAPSHOT_ORDER: &str = "\
name = snapshot-order
object = snapshot
n = 3
f = 1
max_steps = 400000

[op]
p = 1
call = update a

[op]
p = 2
call = update b

[op]
p = 1
call = snapshot

[op]
p = 2
call = snapshot

[op]
p = 1
call = update c

[op]
p = 2
call = snapshot

[adversary]
p = 3
strategy = twisted
values = u, v

[expect]
all-complete
snapshot-order
snapshot-visibility
invariants
checker-pass
";

const TRANSFER_RACE: &str = "\
# One coin, two transfers from its owner: exactly one succeeds.
name = transfer-race
object = asset-transfer
n = 3
f = 1
initial = 1, 0, 0
max_steps = 300000

[op]
p = 1
call = transfer 2 1

[op]
p = 1
call = transfer 3 1

[op]
p = 2
call = read 1

[op]
p = 3
call = read 2

[adversary]
p = 3
strategy = crash-silent
at = 2000

[expect]
all-complete
true-transfers = 1
conservation
invariants
checker-pass
";

const TRANSFER_CHAIN: &str = "\
# One coin moves 1 -> 2 -> 3.
name = transfer-chain
object = asset-transfer
n = 3
f = 1
initial = 1, 0, 0
max_steps = 300000

[op]
p = 1
call = transfer 2 1

[op]
p = 2
call = transfer 3 1
after = 1

[op]
p = 3
call = read 3
after = 2

[expect]
all-complete
true-transfers = 2
conservation
invariants
checker-pass
";
