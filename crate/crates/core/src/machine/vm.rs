//! The toy VM, instruction-set version 1.
//!
//! Programs are bit strings decoded into fixed-width instructions: a 3-bit
//! opcode, followed by a 2-bit operand for `LOOP`, `JMP` and `EXT`.
//!
//! | bits      | mnemonic | effect                                                    |
//! |-----------|----------|-----------------------------------------------------------|
//! | `000`     | HALT     | stop                                                      |
//! | `001`     | INC      | `A ← A + 1`                                               |
//! | `010`     | DBL      | `A ← 2A + 1`                                              |
//! | `011`     | OUT      | append `A mod 2` to the output, `A ← ⌊A/2⌋`               |
//! | `100 kk`  | LOOP k   | if `A > 0`: `A ← A − 1` and jump back `k` instructions    |
//! | `101 kk`  | JMP k    | jump back `k + 1` instructions                            |
//! | `110`     | SWAP     | exchange `A` and `B`                                      |
//! | `111 00`  | CLK      | `A ←` number of steps executed so far                     |
//! | `111 01`  | PRT      | output `← bin(max(A, 1))`                                 |
//! | `111 10`  | ADD      | `A ← A + B`                                               |
//! | `111 11`  | CLR      | output `← λ`                                              |
//!
//! Registers start at 0 and saturate at `u64::MAX`. Every executed instruction
//! costs one step. A jump whose target lies before the first instruction is
//! invalid.
//!
//! Two bits of mode sit in front of the instruction stream: a program starting
//! with `11` is the *timed* form of its remainder `q`. It runs `q`, then spends
//! one step reading the step counter and one step printing it, so it halts at
//! `t_q + 2` with output `bin(t_q)`. Any other program is decoded from its first
//! bit, which means a plain program never starts with SWAP or EXT.
//!
//! The plain machine is forgiving: a program that does not decode (invalid
//! jump, truncated last instruction) halts at step 1 with empty output, and
//! running off the end executes an implicit HALT. The prefix-free machine is
//! strict: it halts only by executing an explicit HALT once every input bit has
//! been fetched. Anything else (truncation, an invalid jump, stopping early,
//! running off the end) diverges. Instructions are fetched in order and jumps
//! only go backwards, so its domain is prefix-free.
//!
//! The prefix-free machine reads its instructions through a different,
//! variable-length code. HALT is cheap and everything else is long, which keeps
//! `2^N · Prob_N` growing slower than `2^N`:
//!
//! | bits       | mnemonic | bits       | mnemonic | bits       | mnemonic |
//! |------------|----------|------------|----------|------------|----------|
//! | `00`       | HALT     | `01010010` | ADD      | `01011000` | LOOP 3   |
//! | `01000`    | INC      | `01010011` | CLK      | `01011001` | JMP 0    |
//! | `010010`   | DBL      | `01010100` | PRT      | `01011010` | JMP 1    |
//! | `0100110`  | OUT      | `01010101` | CLR      | `01011011` | JMP 2    |
//! | `0100111`  | LOOP 0   | `01010110` | LOOP 1   | `01011100` | JMP 3    |
//! | `0101000`  | SWAP     | `01010111` | LOOP 2   |            |          |
//!
//! Bit strings matching no codeword (anything from `011`, `10`, `0101111`,
//! `01011101`) do not decode.

use crate::codec::{bin_u64, BitString};

/// Width of the timed-mode prefix; the constant `c` of the time wrapper.
pub const TIME_PREFIX_BITS: u32 = 2;
/// Steps the timed mode adds on top of the wrapped run.
pub const TIME_STEP_OVERHEAD: u64 = 2;

const TIME_PREFIX: [bool; 2] = [true, true];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Instr {
    Halt,
    Inc,
    Dbl,
    Out,
    Loop(u8),
    Jmp(u8),
    Swap,
    Clk,
    Prt,
    Add,
    Clr,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DecodeError {
    Truncated,
    /// No codeword matches at this bit position.
    Unknown {
        at: usize,
    },
    JumpBeforeStart {
        at: usize,
    },
}

fn read(bits: &[bool], pos: usize, width: usize) -> Option<u8> {
    let slice = bits.get(pos..pos + width)?;
    Some(slice.iter().fold(0u8, |acc, &b| (acc << 1) | u8::from(b)))
}

/// Decode a whole instruction stream. Decoding is unique: the opcodes form a
/// complete prefix code.
pub fn decode(bits: &[bool]) -> Result<Vec<Instr>, DecodeError> {
    let mut pos = 0;
    let mut code = Vec::new();
    while pos < bits.len() {
        let op = read(bits, pos, 3).ok_or(DecodeError::Truncated)?;
        pos += 3;
        let mut operand = || {
            let v = read(bits, pos, 2).ok_or(DecodeError::Truncated);
            pos += 2;
            v
        };
        let instr = match op {
            0b000 => Instr::Halt,
            0b001 => Instr::Inc,
            0b010 => Instr::Dbl,
            0b011 => Instr::Out,
            0b100 => Instr::Loop(operand()?),
            0b101 => Instr::Jmp(operand()?),
            0b110 => Instr::Swap,
            _ => match operand()? {
                0 => Instr::Clk,
                1 => Instr::Prt,
                2 => Instr::Add,
                _ => Instr::Clr,
            },
        };
        check_jump(instr, code.len())?;
        code.push(instr);
    }
    Ok(code)
}

const PREFIX_CODE: [(u8, u8, Instr); 17] = [
    (2, 0b00, Instr::Halt),
    (5, 0b01000, Instr::Inc),
    (6, 0b010010, Instr::Dbl),
    (7, 0b0100110, Instr::Out),
    (7, 0b0100111, Instr::Loop(0)),
    (7, 0b0101000, Instr::Swap),
    (8, 0b01010010, Instr::Add),
    (8, 0b01010011, Instr::Clk),
    (8, 0b01010100, Instr::Prt),
    (8, 0b01010101, Instr::Clr),
    (8, 0b01010110, Instr::Loop(1)),
    (8, 0b01010111, Instr::Loop(2)),
    (8, 0b01011000, Instr::Loop(3)),
    (8, 0b01011001, Instr::Jmp(0)),
    (8, 0b01011010, Instr::Jmp(1)),
    (8, 0b01011011, Instr::Jmp(2)),
    (8, 0b01011100, Instr::Jmp(3)),
];

fn check_jump(instr: Instr, at: usize) -> Result<(), DecodeError> {
    let back = match instr {
        Instr::Loop(k) => usize::from(k),
        Instr::Jmp(k) => usize::from(k) + 1,
        _ => 0,
    };
    if back > at {
        return Err(DecodeError::JumpBeforeStart { at });
    }
    Ok(())
}

/// Decode with the variable-length code of the prefix-free machine.
pub fn decode_prefix(bits: &[bool]) -> Result<Vec<Instr>, DecodeError> {
    let mut pos = 0;
    let mut code = Vec::new();
    while pos < bits.len() {
        let mut acc = 0u8;
        let mut found = None;
        for width in 1..=8u8 {
            let Some(&bit) = bits.get(pos + usize::from(width) - 1) else {
                return Err(DecodeError::Truncated);
            };
            acc = (acc << 1) | u8::from(bit);
            if let Some(&(_, _, instr)) = PREFIX_CODE
                .iter()
                .find(|(w, v, _)| *w == width && *v == acc)
            {
                found = Some((width, instr));
                break;
            }
            if !PREFIX_CODE
                .iter()
                .any(|&(w, v, _)| w > width && v >> (w - width) == acc)
            {
                return Err(DecodeError::Unknown { at: pos });
            }
        }
        let (width, instr) = found.ok_or(DecodeError::Unknown { at: pos })?;
        check_jump(instr, code.len())?;
        code.push(instr);
        pos += usize::from(width);
    }
    Ok(code)
}

/// Which halting discipline the interpreter follows.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Discipline {
    Plain,
    PrefixFree,
}

/// Raw interpreter verdict, before it is folded into a budget-relative outcome.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Exec {
    Halted {
        steps: u64,
        output: BitString,
    },
    /// Certainly never halts (prefix-free rule violations).
    Diverges,
    /// Still running after the budget.
    OutOfBudget,
}

pub fn execute(program: &BitString, discipline: Discipline, budget: u64) -> Exec {
    let bits = program.bits();
    if bits.starts_with(&TIME_PREFIX) {
        let inner = BitString::from_bits(bits[2..].to_vec());
        return match execute(
            &inner,
            discipline,
            budget.saturating_sub(TIME_STEP_OVERHEAD),
        ) {
            Exec::Halted { steps, .. } if steps + TIME_STEP_OVERHEAD <= budget => Exec::Halted {
                steps: steps + TIME_STEP_OVERHEAD,
                output: bin_u64(steps),
            },
            Exec::Halted { .. } | Exec::OutOfBudget => Exec::OutOfBudget,
            Exec::Diverges => Exec::Diverges,
        };
    }
    let decoded = match discipline {
        Discipline::Plain => decode(bits),
        Discipline::PrefixFree => decode_prefix(bits),
    };
    let code = match decoded {
        Ok(code) => code,
        Err(_) => {
            return match discipline {
                Discipline::Plain if budget >= 1 => Exec::Halted {
                    steps: 1,
                    output: BitString::empty(),
                },
                Discipline::Plain => Exec::OutOfBudget,
                Discipline::PrefixFree => Exec::Diverges,
            }
        }
    };
    interpret(&code, discipline, budget)
}

fn interpret(code: &[Instr], discipline: Discipline, budget: u64) -> Exec {
    let (mut a, mut b) = (0u64, 0u64);
    let mut out: Vec<bool> = Vec::new();
    let mut ip = 0usize;
    let mut steps = 0u64;
    let mut furthest = 0usize;
    loop {
        if steps >= budget {
            return Exec::OutOfBudget;
        }
        let Some(&instr) = code.get(ip) else {
            return match discipline {
                Discipline::Plain => Exec::Halted {
                    steps: steps + 1,
                    output: BitString::from_bits(out),
                },
                Discipline::PrefixFree => Exec::Diverges,
            };
        };
        furthest = furthest.max(ip);
        steps += 1;
        match instr {
            Instr::Halt => {
                return match discipline {
                    Discipline::PrefixFree if furthest + 1 != code.len() => Exec::Diverges,
                    _ => Exec::Halted {
                        steps,
                        output: BitString::from_bits(out),
                    },
                };
            }
            Instr::Inc => a = a.saturating_add(1),
            Instr::Dbl => a = a.saturating_mul(2).saturating_add(1),
            Instr::Out => {
                out.push(a & 1 == 1);
                a >>= 1;
            }
            Instr::Loop(k) => {
                if a > 0 {
                    a -= 1;
                    ip -= usize::from(k);
                    continue;
                }
            }
            Instr::Jmp(k) => {
                ip -= usize::from(k) + 1;
                continue;
            }
            Instr::Swap => std::mem::swap(&mut a, &mut b),
            Instr::Clk => a = steps - 1,
            Instr::Prt => out = bin_u64(a.max(1)).bits().to_vec(),
            Instr::Add => a = a.saturating_add(b),
            Instr::Clr => out.clear(),
        }
        ip += 1;
    }
}

/// The time wrapper: `time(p)` halts iff `p` halts, is two bits longer, and
/// prints `bin(t_p)`.
pub fn time_wrap(p: &BitString) -> BitString {
    p.prepend(&TIME_PREFIX)
}
