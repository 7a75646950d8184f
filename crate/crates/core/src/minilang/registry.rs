//! Platform registry: which capability each api namespace needs, and which
//! capabilities count as dangerous.

/// (api namespace, capability it requires, dangerous?)
const NAMESPACES: &[(&str, &str, bool)] = &[
    ("net", "INTERNET", false),
    ("wifi", "ACCESS_WIFI_STATE", false),
    ("vibrate", "VIBRATE", false),
    ("boot", "RECEIVE_BOOT_COMPLETED", false),
    ("wake", "WAKE_LOCK", false),
    ("nfc", "NFC", false),
    ("bt", "BLUETOOTH", false),
    ("sms", "SEND_SMS", true),
    ("phone", "READ_PHONE_STATE", true),
    ("loc", "ACCESS_FINE_LOCATION", true),
    ("cam", "CAMERA", true),
    ("contacts", "READ_CONTACTS", true),
    ("storage", "WRITE_EXTERNAL_STORAGE", true),
    ("mic", "RECORD_AUDIO", true),
];

/// Namespaces whose apis need no capability.
pub const FREE_NAMESPACES: &[&str] = &["ui", "text", "math", "log", "prefs", "anim", "db", "time"];

/// Capability an api needs, decided by its first dotted segment.
pub fn required_capability(api: &str) -> Option<&'static str> {
    let ns = api.split('.').next().unwrap_or(api);
    NAMESPACES.iter().find(|(n, _, _)| *n == ns).map(|(_, c, _)| *c)
}

pub fn is_dangerous(capability: &str) -> bool {
    NAMESPACES.iter().any(|(_, c, d)| *c == capability && *d)
}

pub fn dangerous_capabilities() -> impl Iterator<Item = &'static str> {
    NAMESPACES.iter().filter(|(_, _, d)| *d).map(|(_, c, _)| *c)
}

pub fn known_capabilities() -> impl Iterator<Item = &'static str> {
    NAMESPACES.iter().map(|(_, c, _)| *c)
}

/// Namespaces guarded by a capability.
pub fn guarded_namespaces() -> impl Iterator<Item = (&'static str, &'static str)> {
    NAMESPACES.iter().map(|(n, c, _)| (*n, *c))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lookup() {
        assert_eq!(required_capability("net.open"), Some("INTERNET"));
        assert_eq!(required_capability("ui.show"), None);
        assert!(is_dangerous("SEND_SMS"));
        assert!(!is_dangerous("INTERNET"));
        for ns in FREE_NAMESPACES {
            assert_eq!(required_capability(&format!("{ns}.x")), None);
        }
    }
}
