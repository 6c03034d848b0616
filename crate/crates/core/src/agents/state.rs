use crate::channel::ChannelRow;
use crate::radio::BeamformingMatrix;
use crate::{Error, Result};

/// Four-channel observation of one agent, laid out `[channel][user][antenna]`:
/// `Re h̃`, `Im h̃`, `Re w_prev`, `Im w_prev`.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentState {
    pub rows: usize,
    pub antennas: usize,
    pub data: Vec<f64>,
}

impl AgentState {
    pub fn channel(&self, c: usize) -> &[f64] {
        let plane = self.rows * self.antennas;
        &self.data[c * plane..(c + 1) * plane]
    }
}

/// Builds the observation from the agent's own CSI rows and its previous
/// executed beams (`None` on the first slot).
pub fn encode_state(csi: &[&ChannelRow], prev: Option<&BeamformingMatrix>, rows: usize, antennas: usize) -> Result<AgentState> {
    if csi.len() != rows {
        return Err(Error::Dimension(format!("state expects {rows} users, got {} CSI rows", csi.len())));
    }
    if let Some(r) = csi.iter().find(|r| r.len() != antennas) {
        return Err(Error::Dimension(format!("CSI row of length {} for {antennas} antennas", r.len())));
    }
    if let Some(w) = prev {
        if w.antennas() != antennas || w.users() != rows {
            return Err(Error::Dimension(format!(
                "previous beams are {}×{}, expected {antennas}×{rows}",
                w.antennas(),
                w.users()
            )));
        }
    }
    let plane = rows * antennas;
    let mut data = vec![0.0; 4 * plane];
    for (u, row) in csi.iter().enumerate() {
        for (n, h) in row.iter().enumerate() {
            data[u * antennas + n] = h.re;
            data[plane + u * antennas + n] = h.im;
        }
    }
    if let Some(w) = prev {
        for u in 0..rows {
            for n in 0..antennas {
                let x = w.w[(n, u)];
                data[2 * plane + u * antennas + n] = x.re;
                data[3 * plane + u * antennas + n] = x.im;
            }
        }
    }
    Ok(AgentState { rows, antennas, data })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::complex_normal_row;
    use crate::radio::RadioParams;
    use crate::seed::SeedTree;
    use crate::C64;

    #[test]
    fn first_slot_has_no_previous_beams() {
        let mut rng = SeedTree::new(1).rng();
        let rows: Vec<ChannelRow> = (0..4).map(|_| complex_normal_row(36, &mut rng)).collect();
        let refs: Vec<&ChannelRow> = rows.iter().collect();
        let s = encode_state(&refs, None, 4, 36).unwrap();
        assert_eq!(s.data.len(), 4 * 4 * 36);
        assert!(s.channel(2).iter().chain(s.channel(3)).all(|v| *v == 0.0));
        assert_eq!(s.channel(0)[36 + 5], rows[1][5].re);
        assert_eq!(s.channel(1)[36 + 5], rows[1][5].im);
    }

    #[test]
    fn previous_beams_are_transposed_into_place() {
        let mut rng = SeedTree::new(2).rng();
        let rows: Vec<ChannelRow> = (0..2).map(|_| complex_normal_row(4, &mut rng)).collect();
        let refs: Vec<&ChannelRow> = rows.iter().collect();
        let mut w = BeamformingMatrix::zeros(1, 4, 2, &RadioParams::default());
        w.w[(3, 1)] = C64::new(0.5, -0.25);
        let s = encode_state(&refs, Some(&w), 2, 4).unwrap();
        assert_eq!(s.channel(2)[4 + 3], 0.5);
        assert_eq!(s.channel(3)[4 + 3], -0.25);
    }

    #[test]
    fn wrong_user_set_is_rejected() {
        let mut rng = SeedTree::new(3).rng();
        let rows: Vec<ChannelRow> = (0..3).map(|_| complex_normal_row(4, &mut rng)).collect();
        let refs: Vec<&ChannelRow> = rows.iter().collect();
        assert!(encode_state(&refs, None, 2, 4).is_err());
        assert!(encode_state(&refs, None, 3, 9).is_err());
    }
}
