//! IR instruction vocabulary.

use crate::normalize::{is_address_literal, ADDR, CALL, WILDCARD};
use crate::tree::{BUILTIN_GLOBALS, BUILTIN_MEMBERS};
use crate::frontend::Span;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use std::fmt;
use std::str::FromStr;

pub const DEST: &str = "*DEST*";
pub const VALUE: &str = "*VALUE*";
pub const LOOP: &str = "*LOOP*";

/// How ether leaves the contract in a money-sending call.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MoneyVia {
    Transfer,
    Send,
    /// `f.value(v)(..)` on a user function.
    Value,
    /// `addr.call.value(v)(..)`.
    CallValue,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Builtin {
    MoneySend(MoneyVia),
    Call,
    Callcode,
    Delegatecall,
    Selfdestruct,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Opcode {
    Decl,
    Assign,
    Binop,
    ReadState,
    WriteState,
    Require,
    Assert,
    If,
    CallBuiltin(Builtin),
    CallUser,
    Return,
    Revert,
}

impl Opcode {
    /// Name used for matching; the money-send sub-tag is dropped.
    pub fn match_name(&self) -> &'static str {
        match self {
            Opcode::Decl => "DECL",
            Opcode::Assign => "ASSIGN",
            Opcode::Binop => "BINOP",
            Opcode::ReadState => "READ_STATE",
            Opcode::WriteState => "WRITE_STATE",
            Opcode::Require => "REQUIRE",
            Opcode::Assert => "ASSERT",
            Opcode::If => "IF",
            Opcode::CallBuiltin(Builtin::MoneySend(_)) => "CALL_BUILTIN(moneysend)",
            Opcode::CallBuiltin(Builtin::Call) => "CALL_BUILTIN(call)",
            Opcode::CallBuiltin(Builtin::Callcode) => "CALL_BUILTIN(callcode)",
            Opcode::CallBuiltin(Builtin::Delegatecall) => "CALL_BUILTIN(delegatecall)",
            Opcode::CallBuiltin(Builtin::Selfdestruct) => "CALL_BUILTIN(selfdestruct)",
            Opcode::CallUser => "CALL_USER",
            Opcode::Return => "RETURN",
            Opcode::Revert => "REVERT",
        }
    }

    pub fn is_condition(&self) -> bool {
        matches!(self, Opcode::Require | Opcode::Assert | Opcode::If)
    }
}

impl fmt::Display for Opcode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Opcode::CallBuiltin(Builtin::MoneySend(via)) => {
                let v = match via {
                    MoneyVia::Transfer => "transfer",
                    MoneyVia::Send => "send",
                    MoneyVia::Value => "value",
                    MoneyVia::CallValue => "call.value",
                };
                write!(f, "CALL_BUILTIN(moneysend:{})", v)
            }
            other => f.write_str(other.match_name()),
        }
    }
}

impl FromStr for Opcode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "DECL" => Opcode::Decl,
            "ASSIGN" => Opcode::Assign,
            "BINOP" => Opcode::Binop,
            "READ_STATE" => Opcode::ReadState,
            "WRITE_STATE" => Opcode::WriteState,
            "REQUIRE" => Opcode::Require,
            "ASSERT" => Opcode::Assert,
            "IF" => Opcode::If,
            "CALL_USER" => Opcode::CallUser,
            "RETURN" => Opcode::Return,
            "REVERT" => Opcode::Revert,
            "CALL_BUILTIN(call)" => Opcode::CallBuiltin(Builtin::Call),
            "CALL_BUILTIN(callcode)" => Opcode::CallBuiltin(Builtin::Callcode),
            "CALL_BUILTIN(delegatecall)" => Opcode::CallBuiltin(Builtin::Delegatecall),
            "CALL_BUILTIN(selfdestruct)" => Opcode::CallBuiltin(Builtin::Selfdestruct),
            "CALL_BUILTIN(moneysend)" | "CALL_BUILTIN(moneysend:transfer)" => {
                Opcode::CallBuiltin(Builtin::MoneySend(MoneyVia::Transfer))
            }
            "CALL_BUILTIN(moneysend:send)" => Opcode::CallBuiltin(Builtin::MoneySend(MoneyVia::Send)),
            "CALL_BUILTIN(moneysend:value)" => Opcode::CallBuiltin(Builtin::MoneySend(MoneyVia::Value)),
            "CALL_BUILTIN(moneysend:call.value)" => Opcode::CallBuiltin(Builtin::MoneySend(MoneyVia::CallValue)),
            other => return Err(format!("unknown opcode {}", other)),
        })
    }
}

impl Serialize for Opcode {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Opcode {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// What indexes a state variable access, e.g. `balances[msg.sender]` is keyed by `Sender`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum KeyKind {
    Sender,
    Const,
    Param,
    Local,
    State,
    Other,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Operand {
    State { name: String, key: Option<KeyKind> },
    Local(String),
    Builtin(String),
    Literal(String),
    Callee(String),
    Op(String),
    Temp(u32),
    /// Normalized placeholder such as `*`, `*DEST*` or `*LOOP*`.
    Token(String),
}

impl Operand {
    pub fn token(&self) -> String {
        match self {
            Operand::State { name, .. } => format!("@{}", name),
            Operand::Local(s) | Operand::Builtin(s) | Operand::Literal(s) | Operand::Callee(s) => s.clone(),
            Operand::Op(s) | Operand::Token(s) => s.clone(),
            Operand::Temp(n) => format!("%t{}", n),
        }
    }

    pub fn state_name(&self) -> Option<&str> {
        match self {
            Operand::State { name, .. } => Some(name),
            _ => None,
        }
    }

    pub fn is_builtin(&self, name: &str) -> bool {
        matches!(self, Operand::Builtin(b) if b == name)
    }

    fn normalized(&self) -> Operand {
        match self {
            Operand::State { .. } => Operand::State { name: WILDCARD.into(), key: None },
            Operand::Local(_) | Operand::Temp(_) => Operand::Token(WILDCARD.into()),
            Operand::Literal(t) => {
                if t == "true" || t == "false" || t.starts_with('*') {
                    Operand::Literal(t.clone())
                } else if is_address_literal(t) {
                    Operand::Token(ADDR.into())
                } else {
                    Operand::Token(WILDCARD.into())
                }
            }
            Operand::Callee(n) => {
                if n.starts_with('*') || BUILTIN_MEMBERS.contains(&n.as_str()) || BUILTIN_GLOBALS.contains(&n.as_str()) || n == "new" || n == "_" {
                    Operand::Callee(n.clone())
                } else {
                    Operand::Callee(CALL.into())
                }
            }
            other => other.clone(),
        }
    }
}

impl Serialize for Operand {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.token())
    }
}

impl<'de> Deserialize<'de> for Operand {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Ok(if let Some(name) = s.strip_prefix('@') {
            Operand::State { name: name.to_string(), key: None }
        } else if s.starts_with('*') {
            Operand::Token(s)
        } else {
            Operand::Builtin(s)
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IrInstruction {
    pub opcode: Opcode,
    pub operands: Vec<Operand>,
    /// Temporary defined by this instruction, if any.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub result: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub span: Option<Span>,
    /// For `CALL_USER`: operand 1 is the receiver of a member call (`recv.f(..)`).
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub receiver: bool,
}

impl IrInstruction {
    /// Equality key used by the matcher: opcode family plus operand tokens.
    pub fn key(&self) -> String {
        let mut s = self.opcode.match_name().to_string();
        for o in &self.operands {
            s.push(' ');
            s.push_str(&o.token());
        }
        s
    }

    /// Placeholder form used for matching.
    pub fn normalized(&self) -> IrInstruction {
        let operands = match self.opcode {
            Opcode::CallBuiltin(Builtin::MoneySend(_)) => {
                let mut ops = vec![Operand::Token(DEST.into()), Operand::Token(VALUE.into())];
                ops.truncate(self.operands.len());
                ops
            }
            Opcode::CallBuiltin(_) => self.operands.iter().map(|_| Operand::Token(DEST.into())).collect(),
            _ => self.operands.iter().map(|o| o.normalized()).collect(),
        };
        IrInstruction { operands, ..self.clone() }
    }

    pub fn money_via(&self) -> Option<MoneyVia> {
        match self.opcode {
            Opcode::CallBuiltin(Builtin::MoneySend(v)) => Some(v),
            _ => None,
        }
    }
}

impl fmt::Display for IrInstruction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(r) = self.result {
            write!(f, "%t{} = ", r)?;
        }
        write!(f, "{}(", self.opcode)?;
        for (i, o) in self.operands.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            f.write_str(&o.token())?;
        }
        f.write_str(")")
    }
}
