# CAC Lab Modules Package
