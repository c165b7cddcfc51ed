# bisimagg Modules Package
