//! Wire-backed entanglement service: forwards provisioning and measurement
//! to a distributor process over the framed TCP protocol.

use qauth_core::protocol::Message;
use qauth_core::qsim::{MeasurementSetting, Party};
use qauth_core::resource::{EntanglementService, ResourceError};
use qauth_core::transport::{Channel, TcpEndpoint, TransportError};
use std::time::Duration;

pub struct RemoteDistributor {
    chan: TcpEndpoint,
    timeout: Duration,
}

impl RemoteDistributor {
    pub fn connect(addr: &str, timeout: Duration) -> Result<Self, TransportError> {
        Ok(Self {
            chan: TcpEndpoint::connect(addr)?,
            timeout,
        })
    }

    fn roundtrip(&mut self, msg: &Message) -> Result<Message, ResourceError> {
        self.chan
            .send(msg)
            .map_err(|e| ResourceError::Service(e.to_string()))?;
        self.chan
            .recv(self.timeout)
            .map_err(|e| ResourceError::Service(e.to_string()))
    }
}

impl EntanglementService for RemoteDistributor {
    fn provision(&mut self, session_id: &str, level: u32, count: u64) -> Result<(), ResourceError> {
        let reply = self.roundtrip(&Message::ProvisionRequest {
            session_id: session_id.to_string(),
            level,
            count,
        })?;
        match reply {
            Message::ProvisionAck { .. } => Ok(()),
            Message::Abort { reason } => Err(ResourceError::Service(reason)),
            other => Err(ResourceError::Service(format!(
                "unexpected distributor reply: {other:?}"
            ))),
        }
    }

    fn measure(
        &mut self,
        session_id: &str,
        pair_index: u64,
        party: Party,
        setting: MeasurementSetting,
    ) -> Result<u8, ResourceError> {
        let reply = self.roundtrip(&Message::MeasureRequest {
            session_id: session_id.to_string(),
            pair_index,
            party,
            setting: setting.angle(),
        })?;
        match reply {
            Message::MeasureReply { outcome } => Ok(outcome),
            Message::Abort { reason } => Err(ResourceError::Service(reason)),
            other => Err(ResourceError::Service(format!(
                "unexpected distributor reply: {other:?}"
            ))),
        }
    }
}
