// SPDX-License-Identifier: Apache-2.0
//! Small reference circuits in BLIF.

/// x0·x1 ∨ x2·x3 ∨ x4·x5 as three AND2 gates and an OR3.
pub const PAIRS: &str = "\
.model pairs
.inputs x0 x1 x2 x3 x4 x5
.outputs f
.names x0 x1 a
11 1
.names x2 x3 b
11 1
.names x4 x5 c
11 1
.names a b c f
1-- 1
-1- 1
--1 1
.end
";

/// ISCAS-85 c17: six NAND2 gates.
pub const C17: &str = "\
.model c17
.inputs 1 2 3 6 7
.outputs 22 23
.names 1 3 10
11 0
.names 3 6 11
11 0
.names 2 11 16
11 0
.names 11 7 19
11 0
.names 10 16 22
11 0
.names 16 19 23
11 0
.end
";

pub const MAJORITY: &str = "\
.model majority
.inputs a b c
.outputs m
.names a b c m
11- 1
1-1 1
-11 1
.end
";

/// Two-bit ripple adder.
pub const ADDER2: &str = "\
.model adder2
.inputs a0 a1 b0 b1 cin
.outputs s0 s1 cout
.names a0 b0 cin s0
100 1
010 1
001 1
111 1
.names a0 b0 cin c0
11- 1
1-1 1
-11 1
.names a1 b1 c0 s1
100 1
010 1
001 1
111 1
.names a1 b1 c0 cout
11- 1
1-1 1
-11 1
.end
";

/// 4:1 multiplexer.
pub const MUX4: &str = "\
.model mux4
.inputs s0 s1 d0 d1 d2 d3
.outputs y
.names s0 s1 d0 d1 d2 d3 y
001--- 1
10-1-- 1
01--1- 1
11---1 1
.end
";

pub const PARITY5: &str = "\
.model parity5
.inputs a b c d e
.outputs p
.names a b t0
10 1
01 1
.names c d t1
10 1
01 1
.names t0 t1 t2
10 1
01 1
.names t2 e p
10 1
01 1
.end
";

/// Every fixture as (name, text).
pub const ALL: [(&str, &str); 6] = [
    ("pairs", PAIRS),
    ("c17", C17),
    ("majority", MAJORITY),
    ("adder2", ADDER2),
    ("mux4", MUX4),
    ("parity5", PARITY5),
];
