use std::collections::HashMap;

use crate::sim::{Label, ProcessId, SimError, Value};

/// The atomic SWMR registers, keyed by owner and label. A register that was
/// never written holds [`Value::Bottom`].
#[derive(Debug, Default)]
pub struct Fabric {
    registers: HashMap<(ProcessId, Label), Value>,
}

impl Fabric {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn read(&self, owner: ProcessId, label: &Label) -> Value {
        self.registers
            .get(&(owner, label.clone()))
            .cloned()
            .unwrap_or_default()
    }

    /// Installs `value`, returning the previous content.
    pub fn write(
        &mut self,
        writer: ProcessId,
        owner: ProcessId,
        label: &Label,
        value: Value,
    ) -> Result<Value, SimError> {
        if writer != owner {
            return Err(SimError::NonOwnerWrite {
                writer,
                owner,
                label: label.render(owner),
            });
        }
        Ok(self
            .registers
            .insert((owner, label.clone()), value)
            .unwrap_or_default())
    }

    /// Labels of every register `owner` has written, sorted.
    pub fn owned_labels(&self, owner: ProcessId) -> Vec<Label> {
        let mut labels: Vec<Label> = self
            .registers
            .keys()
            .filter(|(o, _)| *o == owner)
            .map(|(_, l)| l.clone())
            .collect();
        labels.sort();
        labels
    }

    /// All written registers, sorted by owner then label.
    pub fn entries(&self) -> Vec<(ProcessId, &Label, &Value)> {
        let mut out: Vec<_> = self.registers.iter().map(|((o, l), v)| (*o, l, v)).collect();
        out.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        out
    }
}
