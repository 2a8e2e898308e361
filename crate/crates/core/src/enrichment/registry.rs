use std::collections::{HashMap, HashSet};
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Cidr, PrefixTable};
use crate::error::{Error, Result};
use crate::model::SubnetKey;

/// One network allocation from an offline whois dump.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegistryRecord {
    pub cidr: Cidr,
    pub net_handle: String,
    pub parent_handle: Option<String>,
    pub org_name: String,
}

#[derive(Debug, Clone, Deserialize)]
struct RegistryRow {
    cidr: String,
    net_handle: String,
    #[serde(default)]
    parent_handle: Option<String>,
    org_name: String,
}

/// Registry records indexed by prefix and by handle.
#[derive(Debug, Clone)]
pub struct Registry {
    table: PrefixTable<RegistryRecord>,
    by_handle: HashMap<String, Cidr>,
}

impl Registry {
    pub fn build(records: Vec<RegistryRecord>) -> Result<Self> {
        let mut by_handle = HashMap::new();
        for r in &records {
            if let Some(prev) = by_handle.insert(r.net_handle.clone(), r.cidr) {
                if prev != r.cidr {
                    return Err(Error::Data(format!(
                        "registry handle {} names both {prev} and {}",
                        r.net_handle, r.cidr
                    )));
                }
            }
        }
        let table = PrefixTable::build(records.into_iter().map(|r| (r.cidr, r)))?;
        Ok(Registry { table, by_handle })
    }

    /// Reads the `cidr,net_handle,parent_handle,org_name` CSV dump.
    pub fn from_reader<R: Read>(input: R, source_name: &str) -> Result<Self> {
        let mut reader = csv::Reader::from_reader(input);
        let headers = reader.headers().map_err(|e| Error::Header {
            source_name: source_name.into(),
            detail: e.to_string(),
        })?;
        for required in ["cidr", "net_handle", "org_name"] {
            if !headers.iter().any(|h| h == required) {
                return Err(Error::Header {
                    source_name: source_name.into(),
                    detail: format!("missing column {required:?}"),
                });
            }
        }
        let mut records = Vec::new();
        for (i, row) in reader.deserialize::<RegistryRow>().enumerate() {
            let row = row.map_err(|e| Error::Data(format!("{source_name} row {}: {e}", i + 2)))?;
            records.push(RegistryRecord {
                cidr: row.cidr.parse()?,
                net_handle: row.net_handle.trim().to_string(),
                parent_handle: row.parent_handle.map(|p| p.trim().to_string()).filter(|p| !p.is_empty()),
                org_name: row.org_name.trim().to_string(),
            });
        }
        Registry::build(records)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::from_reader(std::io::BufReader::new(file), &path.display().to_string())
    }

    pub fn by_handle(&self, handle: &str) -> Option<&RegistryRecord> {
        let cidr = self.by_handle.get(handle)?;
        self.table.get_exact(cidr)
    }

    pub fn len(&self) -> usize {
        self.table.len()
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }

    pub fn records(&self) -> impl Iterator<Item = &RegistryRecord> {
        self.table.iter().map(|(_, r)| r)
    }

    fn lookup(&self, subnet: &SubnetKey) -> Option<&RegistryRecord> {
        self.table.lookup(subnet.network().addr()).map(|(_, r)| r)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Resolution<'a> {
    Found(&'a RegistryRecord),
    Unknown,
}

/// The registry record responsible for a subnet.
///
/// Looks up the subnet's network address; when the most specific matching
/// block is longer than /24 (IPv4) or /48 (IPv6), parent links are followed
/// until the block is at most that long or the chain ends.
pub fn resolve_org<'a>(subnet: &SubnetKey, registry: &'a Registry) -> Result<Resolution<'a>> {
    let threshold = if subnet.is_ipv6() { 48 } else { 24 };
    let Some(mut current) = registry.lookup(subnet) else {
        return Ok(Resolution::Unknown);
    };
    let mut chain = vec![current.net_handle.clone()];
    let mut seen: HashSet<&str> = HashSet::from([current.net_handle.as_str()]);
    while current.cidr.len() > threshold {
        let Some(parent) = current.parent_handle.as_deref().and_then(|h| registry.by_handle(h)) else {
            break;
        };
        chain.push(parent.net_handle.clone());
        if !seen.insert(parent.net_handle.as_str()) {
            return Err(Error::RegistryCycle(chain));
        }
        current = parent;
    }
    Ok(Resolution::Found(current))
}

/// Reads a `cidr,registry` delegation table used for the foreign-registry cut.
pub fn load_nic_table(path: &Path) -> Result<PrefixTable<String>> {
    #[derive(Deserialize)]
    struct Row {
        cidr: String,
        registry: String,
    }
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::Reader::from_reader(std::io::BufReader::new(file));
    let mut entries = Vec::new();
    for row in reader.deserialize::<Row>() {
        let row = row.map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
        entries.push((row.cidr.parse::<Cidr>()?, row.registry.trim().to_uppercase()));
    }
    PrefixTable::build(entries)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::subnet_key;

    fn rec(cidr: &str, handle: &str, parent: Option<&str>, org: &str) -> RegistryRecord {
        RegistryRecord {
            cidr: cidr.parse().unwrap(),
            net_handle: handle.into(),
            parent_handle: parent.map(Into::into),
            org_name: org.into(),
        }
    }

    fn key(ip: &str) -> SubnetKey {
        subnet_key(ip.parse().unwrap()).unwrap()
    }

    fn found<'a>(r: Resolution<'a>) -> &'a RegistryRecord {
        match r {
            Resolution::Found(r) => r,
            Resolution::Unknown => panic!("unknown"),
        }
    }

    #[test]
    fn long_allocation_defers_to_parent() {
        let reg = Registry::build(vec![
            rec("67.176.0.0/16", "NET-67-176", None, "Comcast Cable Communications, LLC"),
            rec("67.176.158.0/28", "NET-CUST", Some("NET-67-176"), "Joe's Pizza"),
        ])
        .unwrap();
        assert_eq!(found(resolve_org(&key("67.176.158.9"), &reg).unwrap()).net_handle, "NET-67-176");
    }

    #[test]
    fn exact_24_is_itself() {
        let reg = Registry::build(vec![
            rec("67.176.0.0/16", "P", None, "Parent"),
            rec("67.176.158.0/24", "C", Some("P"), "Child"),
        ])
        .unwrap();
        assert_eq!(found(resolve_org(&key("67.176.158.9"), &reg).unwrap()).net_handle, "C");
    }

    #[test]
    fn three_level_chain() {
        let reg = Registry::build(vec![
            rec("24.10.0.0/20", "L20", None, "Big ISP"),
            rec("24.10.4.0/26", "L26", Some("L20"), "Reseller"),
            rec("24.10.4.0/30", "L30", Some("L26"), "Customer"),
        ])
        .unwrap();
        // oracle: walk the chain by hand
        let mut rec = reg.by_handle("L30").unwrap();
        while rec.cidr.len() > 24 {
            rec = reg.by_handle(rec.parent_handle.as_deref().unwrap()).unwrap();
        }
        let got = found(resolve_org(&key("24.10.4.77"), &reg).unwrap());
        assert_eq!(got, rec);
        assert_eq!(got.net_handle, "L20");
    }

    #[test]
    fn cycles_are_reported() {
        let reg = Registry::build(vec![
            rec("24.10.4.0/28", "A", Some("B"), "a"),
            rec("24.10.4.0/30", "B", Some("A"), "b"),
        ])
        .unwrap();
        match resolve_org(&key("24.10.4.1"), &reg) {
            Err(Error::RegistryCycle(chain)) => assert_eq!(chain, vec!["B", "A", "B"]),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn no_match_is_unknown() {
        let reg = Registry::build(vec![rec("24.0.0.0/8", "A", None, "a")]).unwrap();
        assert_eq!(resolve_org(&key("25.1.1.1"), &reg).unwrap(), Resolution::Unknown);
    }

    #[test]
    fn csv_dump_loads() {
        let text = "cidr,net_handle,parent_handle,org_name\n67.176.0.0/16,NET-1,,Comcast Cable Communications\n67.176.158.0/28,NET-2,NET-1,Someone\n";
        let reg = Registry::from_reader(text.as_bytes(), "reg.csv").unwrap();
        assert_eq!(reg.len(), 2);
        assert_eq!(reg.by_handle("NET-2").unwrap().parent_handle.as_deref(), Some("NET-1"));
        assert!(Registry::from_reader("cidr,org\n".as_bytes(), "r").is_err());
    }
}
