use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Rows covered by one full sweep of refresh commands.
pub const REFRESH_COMMANDS_PER_WINDOW: u32 = 8192;

/// Physical organization of the memory system.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DramOrg {
    pub channels: u32,
    pub ranks_per_channel: u32,
    pub banks_per_rank: u32,
    pub subarrays_per_bank: u32,
    pub rows_per_bank: u32,
    pub columns_per_row: u32,
    pub column_width_bytes: u32,
    pub density_gbit: u32,
}

impl Default for DramOrg {
    /// 2 channels, 2 ranks/channel, 8 banks/rank, 8 subarrays/bank,
    /// 64K rows/bank, 8 KB rows of 64-byte columns, 8 Gb chips.
    fn default() -> Self {
        DramOrg {
            channels: 2,
            ranks_per_channel: 2,
            banks_per_rank: 8,
            subarrays_per_bank: 8,
            rows_per_bank: 65536,
            columns_per_row: 128,
            column_width_bytes: 64,
            density_gbit: 8,
        }
    }
}

impl DramOrg {
    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("channels", self.channels),
            ("ranks_per_channel", self.ranks_per_channel),
            ("banks_per_rank", self.banks_per_rank),
            ("subarrays_per_bank", self.subarrays_per_bank),
            ("rows_per_bank", self.rows_per_bank),
            ("columns_per_row", self.columns_per_row),
            ("column_width_bytes", self.column_width_bytes),
        ];
        for (name, v) in counts {
            if v == 0 {
                return Err(Error::config(format!("{name} must be at least 1")));
            }
        }
        if self.banks_per_rank > 64 {
            return Err(Error::config("banks_per_rank above 64 is not supported"));
        }
        if self.rows_per_bank % self.subarrays_per_bank != 0 {
            return Err(Error::config(format!(
                "rows_per_bank ({}) not divisible by subarrays_per_bank ({})",
                self.rows_per_bank, self.subarrays_per_bank
            )));
        }
        if self.rows_per_bank % REFRESH_COMMANDS_PER_WINDOW != 0 {
            return Err(Error::config(format!(
                "rows_per_bank ({}) must be a multiple of {REFRESH_COMMANDS_PER_WINDOW}",
                self.rows_per_bank
            )));
        }
        if !matches!(self.density_gbit, 8 | 16 | 32) {
            return Err(Error::config(format!(
                "unsupported density {} Gb (expected 8, 16 or 32)",
                self.density_gbit
            )));
        }
        Ok(())
    }

    pub fn row_bytes(&self) -> u64 {
        self.columns_per_row as u64 * self.column_width_bytes as u64
    }

    pub fn capacity_bytes(&self) -> u64 {
        self.channels as u64
            * self.ranks_per_channel as u64
            * self.banks_per_rank as u64
            * self.rows_per_bank as u64
            * self.row_bytes()
    }

    pub fn total_ranks(&self) -> usize {
        (self.channels * self.ranks_per_channel) as usize
    }

    pub fn rows_per_subarray(&self) -> u32 {
        self.rows_per_bank / self.subarrays_per_bank
    }

    /// Contiguous block mapping of rows onto subarrays.
    pub fn subarray_of(&self, row: u32) -> u32 {
        debug_assert!(row < self.rows_per_bank);
        row / self.rows_per_subarray()
    }

    /// Rows refreshed by a single refresh command when `commands` refreshes
    /// cover the bank once.
    pub fn rows_per_refresh(&self, commands: u32) -> u32 {
        (self.rows_per_bank / commands).max(1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AddrField {
    Channel,
    Rank,
    Bank,
    Column,
    Row,
}

impl AddrField {
    fn name(self) -> &'static str {
        match self {
            AddrField::Channel => "ch",
            AddrField::Rank => "rank",
            AddrField::Bank => "bank",
            AddrField::Column => "col",
            AddrField::Row => "row",
        }
    }
}

/// Interleaving order of address fields above the byte-in-column offset,
/// lowest first. Fields are peeled off with mixed-radix division, so any
/// permutation of the five fields is a bijection over the capacity.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AddressMapping {
    pub order: [AddrField; 5],
}

impl Default for AddressMapping {
    fn default() -> Self {
        AddressMapping {
            order: [
                AddrField::Channel,
                AddrField::Bank,
                AddrField::Rank,
                AddrField::Column,
                AddrField::Row,
            ],
        }
    }
}

impl fmt::Display for AddressMapping {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<_> = self.order.iter().map(|a| a.name()).collect();
        write!(f, "{}", names.join(","))
    }
}

impl FromStr for AddressMapping {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut order = Vec::with_capacity(5);
        for part in s.split(',') {
            let field = match part.trim().to_ascii_lowercase().as_str() {
                "ch" | "channel" => AddrField::Channel,
                "rank" | "ra" => AddrField::Rank,
                "bank" | "ba" => AddrField::Bank,
                "col" | "column" => AddrField::Column,
                "row" | "ro" => AddrField::Row,
                other => return Err(Error::config(format!("unknown address field `{other}`"))),
            };
            if order.contains(&field) {
                return Err(Error::config(format!("address field `{}` repeated", field.name())));
            }
            order.push(field);
        }
        let order: [AddrField; 5] = order
            .try_into()
            .map_err(|_| Error::config("address mapping must list ch, rank, bank, col and row"))?;
        Ok(AddressMapping { order })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct DecodedAddr {
    pub channel: u32,
    pub rank: u32,
    pub bank: u32,
    pub row: u32,
    pub column: u32,
    pub subarray: u32,
}

fn radix(org: &DramOrg, field: AddrField) -> u64 {
    match field {
        AddrField::Channel => org.channels as u64,
        AddrField::Rank => org.ranks_per_channel as u64,
        AddrField::Bank => org.banks_per_rank as u64,
        AddrField::Column => org.columns_per_row as u64,
        AddrField::Row => org.rows_per_bank as u64,
    }
}

pub fn decode_address(addr: u64, org: &DramOrg, mapping: &AddressMapping) -> Result<DecodedAddr> {
    let capacity = org.capacity_bytes();
    if addr >= capacity {
        return Err(Error::AddressOutOfRange { addr, capacity });
    }
    let mut rest = addr / org.column_width_bytes as u64;
    let mut d = DecodedAddr::default();
    for &field in &mapping.order {
        let r = radix(org, field);
        let v = (rest % r) as u32;
        rest /= r;
        match field {
            AddrField::Channel => d.channel = v,
            AddrField::Rank => d.rank = v,
            AddrField::Bank => d.bank = v,
            AddrField::Column => d.column = v,
            AddrField::Row => d.row = v,
        }
    }
    d.subarray = org.subarray_of(d.row);
    Ok(d)
}

/// Inverse of [`decode_address`]; the byte offset within the column is zero.
pub fn encode_address(d: &DecodedAddr, org: &DramOrg, mapping: &AddressMapping) -> u64 {
    let mut addr = 0u64;
    for &field in mapping.order.iter().rev() {
        let v = match field {
            AddrField::Channel => d.channel,
            AddrField::Rank => d.rank,
            AddrField::Bank => d.bank,
            AddrField::Column => d.column,
            AddrField::Row => d.row,
        } as u64;
        addr = addr * radix(org, field) + v;
    }
    addr * org.column_width_bytes as u64
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn subarray_block_boundaries() {
        let org = DramOrg::default();
        assert_eq!(org.subarray_of(0), 0);
        assert_eq!(org.subarray_of(8191), 0);
        assert_eq!(org.subarray_of(8192), 1);
        assert_eq!(org.subarray_of(65535), 7);
    }

    #[test]
    fn eight_rows_per_refresh() {
        assert_eq!(DramOrg::default().rows_per_refresh(REFRESH_COMMANDS_PER_WINDOW), 8);
    }

    #[test]
    fn zero_address_decodes_to_origin() {
        let org = DramOrg::default();
        let d = decode_address(0, &org, &AddressMapping::default()).unwrap();
        assert_eq!(d, DecodedAddr::default());
    }

    #[test]
    fn last_column_decodes_to_highest_coordinates() {
        let org = DramOrg::default();
        let map = AddressMapping::default();
        let addr = org.capacity_bytes() - org.column_width_bytes as u64;
        let d = decode_address(addr, &org, &map).unwrap();

        // Brute-force inverse: search the top corner of every field for the
        // coordinate tuple that encodes to `addr`.
        let mut found = None;
        for ch in 0..org.channels {
            for rank in 0..org.ranks_per_channel {
                for bank in 0..org.banks_per_rank {
                    for column in org.columns_per_row - 2..org.columns_per_row {
                        for row in org.rows_per_bank - 2..org.rows_per_bank {
                            let c = DecodedAddr {
                                channel: ch,
                                rank,
                                bank,
                                row,
                                column,
                                subarray: org.subarray_of(row),
                            };
                            if encode_address(&c, &org, &map) == addr {
                                found = Some(c);
                            }
                        }
                    }
                }
            }
        }
        assert_eq!(Some(d), found);
        assert_eq!(d.row, org.rows_per_bank - 1);
        assert_eq!(d.column, org.columns_per_row - 1);
        assert_eq!(d.bank, org.banks_per_rank - 1);
        assert_eq!(d.rank, org.ranks_per_channel - 1);
        assert_eq!(d.channel, org.channels - 1);
        assert_eq!(d.subarray, org.subarray_of(d.row));
    }

    #[test]
    fn out_of_range_rejected() {
        let org = DramOrg::default();
        let err = decode_address(org.capacity_bytes(), &org, &AddressMapping::default());
        assert!(matches!(err, Err(Error::AddressOutOfRange { .. })));
    }

    #[test]
    fn default_mapping_interleaves_channel_first() {
        let org = DramOrg::default();
        let map = AddressMapping::default();
        let a = decode_address(64, &org, &map).unwrap();
        assert_eq!((a.channel, a.bank), (1, 0));
        let b = decode_address(128, &org, &map).unwrap();
        assert_eq!((b.channel, b.bank), (0, 1));
    }

    #[test]
    fn mapping_parse_roundtrip() {
        let m: AddressMapping = "row,col,rank,bank,ch".parse().unwrap();
        assert_eq!(m.to_string().parse::<AddressMapping>().unwrap(), m);
        assert!("row,col,rank,bank".parse::<AddressMapping>().is_err());
        assert!("row,row,rank,bank,ch".parse::<AddressMapping>().is_err());
    }

    #[test]
    fn validation_rejects_bad_shapes() {
        let mut org = DramOrg::default();
        org.subarrays_per_bank = 3;
        assert!(org.validate().is_err());
        let mut org = DramOrg::default();
        org.density_gbit = 12;
        assert!(org.validate().is_err());
        let mut org = DramOrg::default();
        org.rows_per_bank = 4096;
        org.subarrays_per_bank = 1;
        assert!(org.validate().is_err());
        assert!(DramOrg::default().validate().is_ok());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(10_000))]
        #[test]
        fn decode_encode_roundtrip(line in 0u64..(DramOrg::default().capacity_bytes() / 64)) {
            let org = DramOrg::default();
            let map = AddressMapping::default();
            let addr = line * 64;
            let d = decode_address(addr, &org, &map).unwrap();
            prop_assert!(d.channel < org.channels && d.rank < org.ranks_per_channel);
            prop_assert!(d.bank < org.banks_per_rank && d.row < org.rows_per_bank);
            prop_assert!(d.column < org.columns_per_row && d.subarray < org.subarrays_per_bank);
            prop_assert_eq!(encode_address(&d, &org, &map), addr);
        }
    }
}
